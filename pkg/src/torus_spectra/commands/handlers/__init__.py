"""Command handlers; importing a module registers its command."""
