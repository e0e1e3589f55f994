package com.example.notes.data;

import java.util.ArrayList;
import java.util.List;

public class NoteStore {
    private final List<Note> notes = new ArrayList<>();

    public void add(Note note) {
        notes.add(note);
    }

    public int count() {
        return notes.size();
    }

    public int urgentCount() {
        int total = 0;
        for (Note n : notes) {
            if (n.isUrgent()) {
                total = total + 1;
            }
        }
        return total;
    }

    public Note first() {
        return notes.get(0);
    }

    static class Entry {
        private final Note note;

        Entry(Note note) {
            this.note = note;
        }
    }
}
