"""Shared helpers: seeded streams, numerical differentiation, run manifests."""
