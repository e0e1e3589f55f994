package com.example.notes;

import android.app.Activity;
import android.os.Bundle;
import android.util.Log;
import com.example.notes.data.Note;
import com.example.notes.data.NoteStore;

public class MainActivity extends Activity {
    private final NoteStore store = new NoteStore();

    @Override
    protected void onCreate(Bundle savedInstanceState) {
        super.onCreate(savedInstanceState);
        seed();
        Log.d("MainActivity", "notes: " + store.count());
    }

    private void seed() {
        store.add(new Note("Buy milk", 1));
        store.add(new Note("Pay rent", 5));
    }

    public String summary() {
        return store.count() + " notes, " + store.urgentCount() + " urgent";
    }
}
