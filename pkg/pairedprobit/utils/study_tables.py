# Blood lead levels (ug/dl) of 33 matched pairs: (pair id, case child, control child).
# Cases are children of battery-plant employees.
LEAD_LEVELS = (
    (1, 38, 16),
    (2, 23, 18),
    (3, 41, 18),
    (4, 18, 24),
    (5, 37, 19),
    (6, 36, 11),
    (7, 23, 10),
    (8, 62, 15),
    (9, 31, 16),
    (10, 34, 18),
    (11, 24, 18),
    (12, 14, 13),
    (13, 21, 19),
    (14, 17, 10),
    (15, 16, 16),
    (16, 20, 16),
    (17, 15, 24),
    (18, 10, 13),
    (19, 45, 9),
    (20, 39, 14),
    (21, 22, 21),
    (22, 35, 19),
    (23, 49, 7),
    (24, 48, 18),
    (25, 44, 19),
    (26, 35, 12),
    (27, 43, 11),
    (28, 39, 22),
    (29, 34, 25),
    (30, 13, 16),
    (31, 73, 13),
    (32, 25, 11),
    (33, 27, 13),
)

# Remission times (weeks) of 42 acute leukaemia patients in 21 pairs:
# (pair id, weeks, event flag (1 = relapse observed, 0 = censored), group).
LEUKAEMIA_REMISSIONS = (
    (1, 1, 1, "control"),
    (1, 10, 1, "6-MP"),
    (2, 22, 1, "control"),
    (2, 7, 1, "6-MP"),
    (3, 3, 1, "control"),
    (3, 32, 0, "6-MP"),
    (4, 12, 1, "control"),
    (4, 23, 1, "6-MP"),
    (5, 8, 1, "control"),
    (5, 22, 1, "6-MP"),
    (6, 17, 1, "control"),
    (6, 6, 1, "6-MP"),
    (7, 2, 1, "control"),
    (7, 16, 1, "6-MP"),
    (8, 11, 1, "control"),
    (8, 34, 0, "6-MP"),
    (9, 8, 1, "control"),
    (9, 32, 0, "6-MP"),
    (10, 12, 1, "control"),
    (10, 25, 0, "6-MP"),
    (11, 2, 1, "control"),
    (11, 11, 0, "6-MP"),
    (12, 5, 1, "control"),
    (12, 20, 0, "6-MP"),
    (13, 4, 1, "control"),
    (13, 19, 0, "6-MP"),
    (14, 15, 1, "control"),
    (14, 6, 1, "6-MP"),
    (15, 8, 1, "control"),
    (15, 17, 0, "6-MP"),
    (16, 23, 1, "control"),
    (16, 35, 0, "6-MP"),
    (17, 5, 1, "control"),
    (17, 6, 1, "6-MP"),
    (18, 11, 1, "control"),
    (18, 13, 1, "6-MP"),
    (19, 4, 1, "control"),
    (19, 9, 0, "6-MP"),
    (20, 1, 1, "control"),
    (20, 6, 0, "6-MP"),
    (21, 8, 1, "control"),
    (21, 10, 0, "6-MP"),
)

TREATED_GROUP = "6-MP"
CONTROL_GROUP = "control"
