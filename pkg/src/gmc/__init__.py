"""Granularity-modulated correlation surfaces for IQA score files."""
