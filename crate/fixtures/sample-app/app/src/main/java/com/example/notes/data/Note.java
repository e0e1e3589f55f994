package com.example.notes.data;

public class Note {
    private final String title;
    private int priority;

    public Note(String title, int priority) {
        this.title = title;
        this.priority = priority;
    }

    public String getTitle() {
        return title;
    }

    public int getPriority() {
        return priority;
    }

    public boolean isUrgent() {
        return priority > 3;
    }

    public void bump() {
        priority = priority + 1;
    }
}
