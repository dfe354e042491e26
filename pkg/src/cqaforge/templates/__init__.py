"""Shipped chat-template marker sets and prompt bodies (data files)."""
