"""Published stash percentages: (real, est.) per s0 row and epsilon column."""

EPSILONS = ("0", "0.001", "0.01", "0.03", "0.05", "0.1")
S0_ROWS = (1, 4, 16, 32, 64, 256)

# B -> {s0: [(real, est) for each epsilon]}
TABLES = {
    1024: {
        1: [("17.2", "18.4"), ("17.1", "18.3"), ("16.7", "17.4"), ("15.9", "15.7"), ("15.1", "14.5"), ("13", "12")],
        4: [("5.6", "6.8"), ("5.5", "6.7"), ("5.1", "5.9"), ("4.2", "4.4"), ("3.4", "3.4"), ("1.7", "1.7")],
        16: [("1.8", "2.8"), ("1.7", "2.7"), ("1.3", "1.9"), ("0.7", "0.7"), ("0.3", "0.1"), ("0.01", "0.1")],
        32: [("1.4", "2"), ("1.3", "1.9"), ("0.9", "1.2"), ("0.4", "0.3"), ("0.1", "0.5"), ("0.003", "0.009")],
        64: [("1.3", "1.6"), ("1.2", "1.5"), ("0.8", "0.9"), ("0.3", "0.6"), ("0.1", "0.2"), ("0.003", "0.002")],
        256: [("1.3", "1.3"), ("1.2", "1.3"), ("0.8", "1"), ("0.3", "0.3"), ("0.08", "0.09"), ("0.003", "0.0005")],
    },
    512: {
        1: [("17.2", "18.9"), ("17.1", "18.8"), ("16.7", "17.9"), ("15.9", "16.1"), ("15.1", "14.7"), ("13", "12")],
        4: [("5.6", "7.3"), ("5.5", "7.2"), ("5.1", "6.4"), ("4.2", "4.8"), ("3.4", "3.6"), ("1.7", "1.7")],
        16: [("2.2", "3.3"), ("2.1", "3.2"), ("1.7", "2.4"), ("1", "1"), ("0.5", "0.3"), ("0.06", "0.4")],
        32: [("1.9", "2.5"), ("1.8", "2.4"), ("1.4", "1.7"), ("0.8", "0.7"), ("0.4", "0.9"), ("0.03", "0.09")],
        64: [("1.9", "2.2"), ("1.7", "2.1"), ("1.4", "1.4"), ("0.7", "1.1"), ("0.4", "0.5"), ("0.03", "0.04")],
        256: [("1.9", "1.9"), ("1.7", "1.8"), ("1.3", "1.5"), ("0.7", "0.8"), ("0.4", "0.3"), ("0.03", "0.02")],
    },
    2048: {
        1: [("17.2", "18"), ("17.1", "17.9"), ("16.7", "17.1"), ("15.9", "15.6"), ("15.1", "14.4"), ("13", "12")],
        4: [("5.6", "6.5"), ("5.5", "6.4"), ("5.1", "5.5"), ("4.2", "4.2"), ("3.4", "3.3"), ("1.6", "1.7")],
        16: [("1.6", "2.4"), ("1.5", "2.3"), ("1.1", "1.5"), ("0.5", "0.5"), ("0.2", "0.06"), ("0.0009", "0.02")],
        32: [("1.1", "1.7"), ("1", "1.6"), ("0.6", "0.8"), ("0.2", "0.09"), ("0.03", "0.2"), ("0.0002", "0.0002")],
        64: [("0.9", "1.3"), ("0.8", "1.2"), ("0.5", "0.5"), ("0.1", "0.3"), ("0.02", "0.05"), ("0.0001", "1e-05")],
        256: [("0.9", "1"), ("0.8", "0.9"), ("0.5", "0.6"), ("0.1", "0.1"), ("0.01", "0.01"), ("0.0002", "1e-06")],
    },
}

IDEAL = {
    1024: ("1.2", "1.2", "0.8", "0.3", "0.07", "0.0003"),
    512: ("1.8", "1.7", "1.3", "0.7", "0.3", "0.01"),
    2048: ("0.9", "0.8", "0.5", "0.09", "0.008", "4e-07"),
}
