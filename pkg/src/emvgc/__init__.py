"""Anchor-based multi-view graph clustering with local and global structure."""
