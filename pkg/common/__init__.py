"""Shared infrastructure: error hierarchy, container files, and digests."""
