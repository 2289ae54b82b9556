"""Operator surface: campaign CLI, codec utility and the live UDP tunnel."""
