//! Book chapters as doctests (placeholder).
