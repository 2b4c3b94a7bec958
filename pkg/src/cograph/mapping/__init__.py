"""Per-robot mapping: back-projection, object fusion, clustering and edges."""
