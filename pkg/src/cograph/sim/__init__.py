"""Synthetic worlds, rendering, channel and scenario runner."""
