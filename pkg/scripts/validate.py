"""Monte-Carlo check of every closed form on the standard grid."""

from _common import Recipe

if __name__ == "__main__":
    recipe = Recipe(__doc__)
    recipe.emit("validate", "validate", "--trials", "100000", "--seed", "7")
