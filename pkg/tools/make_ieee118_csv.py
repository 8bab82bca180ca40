"""Regenerate the bundled IEEE 118-bus branch CSV.

The raw table below is the standard IEEE 118-bus test system branch list
(186 branches, per-unit series resistance and reactance on a 100 MVA base;
the nine r=0 rows are ideal transformer branches). Each branch's series
impedance is converted to admittance,

    g = r / (r^2 + x^2),   b = x / (r^2 + x^2),

parallel branches between the same bus pair are merged by adding admittances,
and the result is written as ``from,to,conductance,susceptance`` with 1-based
bus indices. Run from the repository root:

    python tools/make_ieee118_csv.py
"""

from pathlib import Path

BRANCHES = [
    # (from_bus, to_bus, r_pu, x_pu)
    (1, 2, 0.0303, 0.0999),
    (1, 3, 0.0129, 0.0424),
    (4, 5, 0.00176, 0.00798),
    (3, 5, 0.0241, 0.108),
    (5, 6, 0.0119, 0.054),
    (6, 7, 0.00459, 0.0208),
    (8, 9, 0.00244, 0.0305),
    (8, 5, 0.0, 0.0267),
    (9, 10, 0.00258, 0.0322),
    (4, 11, 0.0209, 0.0688),
    (5, 11, 0.0203, 0.0682),
    (11, 12, 0.00595, 0.0196),
    (2, 12, 0.0187, 0.0616),
    (3, 12, 0.0484, 0.16),
    (7, 12, 0.00862, 0.034),
    (11, 13, 0.02225, 0.0731),
    (12, 14, 0.0215, 0.0707),
    (13, 15, 0.0744, 0.2444),
    (14, 15, 0.0595, 0.195),
    (12, 16, 0.0212, 0.0834),
    (15, 17, 0.0132, 0.0437),
    (16, 17, 0.0454, 0.1801),
    (17, 18, 0.0123, 0.0505),
    (18, 19, 0.01119, 0.0493),
    (19, 20, 0.0252, 0.117),
    (15, 19, 0.012, 0.0394),
    (20, 21, 0.0183, 0.0849),
    (21, 22, 0.0209, 0.097),
    (22, 23, 0.0342, 0.159),
    (23, 24, 0.0135, 0.0492),
    (23, 25, 0.0156, 0.08),
    (26, 25, 0.0, 0.0382),
    (25, 27, 0.0318, 0.163),
    (27, 28, 0.01913, 0.0855),
    (28, 29, 0.0237, 0.0943),
    (30, 17, 0.0, 0.0388),
    (8, 30, 0.00431, 0.0504),
    (26, 30, 0.00799, 0.086),
    (17, 31, 0.0474, 0.1563),
    (29, 31, 0.0108, 0.0331),
    (23, 32, 0.0317, 0.1153),
    (31, 32, 0.0298, 0.0985),
    (27, 32, 0.0229, 0.0755),
    (15, 33, 0.038, 0.1244),
    (19, 34, 0.0752, 0.247),
    (35, 36, 0.00224, 0.0102),
    (35, 37, 0.011, 0.0497),
    (33, 37, 0.0415, 0.142),
    (34, 36, 0.00871, 0.0268),
    (34, 37, 0.00256, 0.0094),
    (38, 37, 0.0, 0.0375),
    (37, 39, 0.0321, 0.106),
    (37, 40, 0.0593, 0.168),
    (30, 38, 0.00464, 0.054),
    (39, 40, 0.0184, 0.0605),
    (40, 41, 0.0145, 0.0487),
    (40, 42, 0.0555, 0.183),
    (41, 42, 0.041, 0.135),
    (43, 44, 0.0608, 0.2454),
    (34, 43, 0.0413, 0.1681),
    (44, 45, 0.0224, 0.0901),
    (45, 46, 0.04, 0.1356),
    (46, 47, 0.038, 0.127),
    (46, 48, 0.0601, 0.189),
    (47, 49, 0.0191, 0.0625),
    (42, 49, 0.0715, 0.323),
    (42, 49, 0.0715, 0.323),
    (45, 49, 0.0684, 0.186),
    (48, 49, 0.0179, 0.0505),
    (49, 50, 0.0267, 0.0752),
    (49, 51, 0.0486, 0.137),
    (51, 52, 0.0203, 0.0588),
    (52, 53, 0.0405, 0.1635),
    (53, 54, 0.0263, 0.122),
    (49, 54, 0.073, 0.289),
    (49, 54, 0.0869, 0.291),
    (54, 55, 0.0169, 0.0707),
    (54, 56, 0.00275, 0.00955),
    (55, 56, 0.00488, 0.0151),
    (56, 57, 0.0343, 0.0966),
    (50, 57, 0.0474, 0.134),
    (56, 58, 0.0343, 0.0966),
    (51, 58, 0.0255, 0.0719),
    (54, 59, 0.0503, 0.2293),
    (56, 59, 0.0825, 0.251),
    (56, 59, 0.0803, 0.239),
    (55, 59, 0.04739, 0.2158),
    (59, 60, 0.0317, 0.145),
    (59, 61, 0.0328, 0.15),
    (60, 61, 0.00264, 0.0135),
    (60, 62, 0.0123, 0.0561),
    (61, 62, 0.00824, 0.0376),
    (63, 59, 0.0, 0.0386),
    (63, 64, 0.00172, 0.02),
    (64, 61, 0.0, 0.0268),
    (38, 65, 0.00901, 0.0986),
    (64, 65, 0.00269, 0.0302),
    (49, 66, 0.018, 0.0919),
    (49, 66, 0.018, 0.0919),
    (62, 66, 0.0482, 0.218),
    (62, 67, 0.0258, 0.117),
    (65, 66, 0.0, 0.037),
    (66, 67, 0.0224, 0.1015),
    (65, 68, 0.00138, 0.016),
    (47, 69, 0.0844, 0.2778),
    (49, 69, 0.0985, 0.324),
    (68, 69, 0.0, 0.037),
    (69, 70, 0.03, 0.127),
    (24, 70, 0.00221, 0.4115),
    (70, 71, 0.00882, 0.0355),
    (24, 72, 0.0488, 0.196),
    (71, 72, 0.0446, 0.18),
    (71, 73, 0.00866, 0.0454),
    (70, 74, 0.0401, 0.1323),
    (70, 75, 0.0428, 0.141),
    (69, 75, 0.0405, 0.122),
    (74, 75, 0.0123, 0.0406),
    (76, 77, 0.0444, 0.148),
    (69, 77, 0.0309, 0.101),
    (75, 77, 0.0601, 0.1999),
    (77, 78, 0.00376, 0.0124),
    (78, 79, 0.00546, 0.0244),
    (77, 80, 0.017, 0.0485),
    (77, 80, 0.0294, 0.105),
    (79, 80, 0.0156, 0.0704),
    (68, 81, 0.00175, 0.0202),
    (81, 80, 0.0, 0.037),
    (77, 82, 0.0298, 0.0853),
    (82, 83, 0.0112, 0.03665),
    (83, 84, 0.0625, 0.132),
    (83, 85, 0.043, 0.148),
    (84, 85, 0.0302, 0.0641),
    (85, 86, 0.035, 0.123),
    (86, 87, 0.02828, 0.2074),
    (85, 88, 0.02, 0.102),
    (85, 89, 0.0239, 0.173),
    (88, 89, 0.0139, 0.0712),
    (89, 90, 0.0518, 0.188),
    (89, 90, 0.0238, 0.0997),
    (90, 91, 0.0254, 0.0836),
    (89, 92, 0.0099, 0.0505),
    (89, 92, 0.0393, 0.1581),
    (91, 92, 0.0387, 0.1272),
    (92, 93, 0.0258, 0.0848),
    (92, 94, 0.0481, 0.158),
    (93, 94, 0.0223, 0.0732),
    (94, 95, 0.0132, 0.0434),
    (80, 96, 0.0356, 0.182),
    (82, 96, 0.0162, 0.053),
    (94, 96, 0.0269, 0.0869),
    (80, 97, 0.0183, 0.0934),
    (80, 98, 0.0238, 0.108),
    (80, 99, 0.0454, 0.206),
    (92, 100, 0.0648, 0.295),
    (94, 100, 0.0178, 0.058),
    (95, 96, 0.0171, 0.0547),
    (96, 97, 0.0173, 0.0885),
    (98, 100, 0.0397, 0.179),
    (99, 100, 0.018, 0.0813),
    (100, 101, 0.0277, 0.1262),
    (92, 102, 0.0123, 0.0559),
    (101, 102, 0.0246, 0.112),
    (100, 103, 0.016, 0.0525),
    (100, 104, 0.0451, 0.204),
    (103, 104, 0.0466, 0.1584),
    (103, 105, 0.0535, 0.1625),
    (100, 106, 0.0605, 0.229),
    (104, 105, 0.00994, 0.0378),
    (105, 106, 0.014, 0.0547),
    (105, 107, 0.053, 0.183),
    (105, 108, 0.0261, 0.0703),
    (106, 107, 0.053, 0.183),
    (108, 109, 0.0105, 0.0288),
    (103, 110, 0.03906, 0.1813),
    (109, 110, 0.0278, 0.0762),
    (110, 111, 0.022, 0.0755),
    (110, 112, 0.0247, 0.064),
    (17, 113, 0.00913, 0.0301),
    (32, 113, 0.0615, 0.203),
    (32, 114, 0.0135, 0.0612),
    (27, 115, 0.0164, 0.0741),
    (114, 115, 0.0023, 0.0104),
    (68, 116, 0.00034, 0.00405),
    (12, 117, 0.0329, 0.14),
    (75, 118, 0.0145, 0.0481),
    (76, 118, 0.0164, 0.0544),
]


def main() -> None:
    merged: dict[tuple[int, int], tuple[float, float]] = {}
    for f, t, r, x in BRANCHES:
        key = (min(f, t), max(f, t))
        denom = r * r + x * x
        g, b = r / denom, x / denom
        if key in merged:
            g0, b0 = merged[key]
            merged[key] = (g0 + g, b0 + b)
        else:
            merged[key] = (g, b)

    out = Path(__file__).resolve().parents[1] / "src" / "gspest" / "data" / "ieee118_branches.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("from,to,conductance,susceptance\n")
        for (f, t), (g, b) in sorted(merged.items()):
            fh.write(f"{f},{t},{format(g, '.17g')},{format(b, '.17g')}\n")
    print(f"wrote {out} ({len(merged)} branches, {len(BRANCHES)} raw rows)")


if __name__ == "__main__":
    main()
