"""Arc-order bucket sequences for s0 = 3, frozen from the reference figure."""

FIGURE_S0 = 3

# (bucket count, sequence)
FIGURE_LINES = [
    (3, "0 1 2"),
    (6, "0 1 2 3 4 5"),
    (12, "0 1 2 6 8 10 3 4 5 7 9 11"),
    (24, "0 1 2 12 16 20 6 8 10 13 17 21 3 4 5 14 18 22 7 9 11 15 19 23"),
    (
        32,
        "0 1 2 24 12 16 20 25 6 8 10 26 13 17 21 27 3 4 5 28 14 18 22 29 "
        "7 9 11 30 15 19 23 31",
    ),
    (
        40,
        "0 1 2 24 32 12 16 20 25 33 6 8 10 26 34 13 17 21 27 35 3 4 5 28 36 "
        "14 18 22 29 37 7 9 11 30 38 15 19 23 31 39",
    ),
    (
        48,
        "0 1 2 24 32 40 12 16 20 25 33 41 6 8 10 26 34 42 13 17 21 27 35 43 "
        "3 4 5 28 36 44 14 18 22 29 37 45 7 9 11 30 38 46 15 19 23 31 39 47",
    ),
]
