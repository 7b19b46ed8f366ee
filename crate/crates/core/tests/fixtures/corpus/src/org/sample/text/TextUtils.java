package org.sample.text;

import java.util.ArrayList;
import java.util.List;

public final class TextUtils {
    private TextUtils() {
    }

    /**
     * Returns true when the given string is null or contains only whitespace.
     *
     * @param s the string to check
     * @return whether the string is blank
     */
    public static boolean isBlank(String s) {
        return s == null || s.trim().isEmpty();
    }

    /**
     * Capitalizes the first character of the string and leaves the rest unchanged.
     *
     * @param s the input string
     * @return the capitalized string
     */
    public static String capitalize(String s) {
        if (isBlank(s)) {
            return s;
        }
        return Character.toUpperCase(s.charAt(0)) + s.substring(1);
    }

    /**
     * Reverses the characters of the given string.
     *
     * @param s the string to reverse
     * @return a new string with the characters in reverse order
     */
    public static String reverse(String s) {
        return new StringBuilder(s).reverse().toString();
    }

    /**
     * Counts how many times a character occurs in the string.
     *
     * @param s the string to scan
     * @param c the character to count
     * @return the number of occurrences
     */
    public static int countChar(String s, char c) {
        int n = 0;
        for (int i = 0; i < s.length(); i++) {
            if (s.charAt(i) == c) {
                n++;
            }
        }
        return n;
    }

    /**
     * Repeats the string the given number of times.
     *
     * @param s the string to repeat
     * @param times how many copies to join
     * @return the repeated string
     */
    public static String repeat(String s, int times) {
        StringBuilder sb = new StringBuilder();
        for (int i = 0; i < times; i++) {
            sb.append(s);
        }
        return sb.toString();
    }

    /**
     * Pads the string on the left with spaces up to the given width.
     *
     * @param s the string to pad
     * @param width the minimum resulting width
     * @return the padded string
     */
    public static String padLeft(String s, int width) {
        if (s.length() >= width) {
            return s;
        }
        return repeat(" ", width - s.length()) + s;
    }

    /**
     * Splits the text into words separated by whitespace.
     *
     * @param text the text to split
     * @return the list of non-empty words
     */
    public static List<String> words(String text) {
        List<String> out = new ArrayList<>();
        for (String w : text.split("\\s+")) {
            if (!w.isEmpty()) {
                out.add(w);
            }
        }
        return out;
    }

    /** Trims it. */
    public static String trim(String s) {
        return s.trim();
    }
}
