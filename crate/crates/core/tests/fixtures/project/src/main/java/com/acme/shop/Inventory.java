package com.acme.shop;

public class Inventory {
    private int stock;

    public Inventory(int stock) {
        this.stock = stock;
    }

    public boolean available(int count) {
        log("checking " + count);
        return stock >= count;
    }

    public void reserve(int count) {
        if (count > stock) {
            release(stock - count);
            return;
        }
        stock -= count;
    }

    public void release(int count) {
        if (count < 0) {
            reserve(-count);
            return;
        }
        stock += count;
    }

    @Deprecated
    void log(String message) {
        System.out.println(message);
    }
}
