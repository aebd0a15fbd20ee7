"""Test suite for RGN-CPD."""
