"""Test suite for the sphs package"""
