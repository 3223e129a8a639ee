"""Simulation, derandomization and program-search lab for Win/No-Halt games."""

__version__ = "0.1.0"
