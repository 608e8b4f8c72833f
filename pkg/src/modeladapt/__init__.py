"""Model-adaptive interface toolkit: derive search, detail, and editing
interfaces for relational data from the catalog's own schema, annotations,
and access policy."""

__version__ = "0.1.0"
