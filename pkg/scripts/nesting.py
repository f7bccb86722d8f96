"""Per-level OBP/CP ratio at p=0.02, beta=0.2 for two swap probabilities."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    for preset in ("nesting-low-ps", "nesting-high-ps"):
        recipe.emit(f"nesting_{preset}", "sweep", "nesting", "--preset", preset, "--levels", "8")
        recipe.emit(f"schedule_{preset}", "optimize", "--preset", preset, "--levels", "8")
