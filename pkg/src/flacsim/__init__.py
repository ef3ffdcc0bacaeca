"""Simulator for privacy-preserving, fuzzy-logic access control on a permissioned ledger."""

__version__ = "0.1.0"
