"""Test package for pofsm."""
