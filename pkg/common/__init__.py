"""Shared utilities across CSC components."""
