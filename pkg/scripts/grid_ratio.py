"""log10 of the OBP/CP rate ratio over the (p, beta) plane at level 1."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    recipe.emit("grid_ratio", "sweep", "grid_ratio",
         "--axis", "p=0.01:1:101:log", "--axis", "beta=0.01:1:101")
