"""Test suite for pdmrec."""
