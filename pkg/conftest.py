# Keeps the repository root importable so `import qdistill` works without installing.
