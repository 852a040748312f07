"""Benchmark harness: challenge manifests, isolated trials, the
condition matrix, and the statistics used to summarize it."""
