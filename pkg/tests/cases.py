"""Crafted judge and quality outputs with their expected parses.

``None`` means the parser must refuse the text.
"""

JUDGE_CASES = [
    ("Explanation: same school.\nDecision: TRUE", True),
    ('Explanation: the years differ.\nDecision: "FALSE"', False),
    ("I think it matches.", None),
    ("Decision: true", True),
    ("decision: False", False),
    ("Explanation: ok\nDecision: 'TRUE'", True),
    ("**Decision:** TRUE", True),
    ("**Decision**: FALSE", False),
    ("Decision: (TRUE)", True),
    ("Decision: TRUE.", True),
    ("Explanation: first pass\nDecision: FALSE\nOn reflection the alias matches.\nDecision: TRUE", True),
    ("Decision: TRUE\nDecision: FALSE", False),
    ("Decision: maybe", None),
    ("Decision:", None),
    ("The decision is TRUE", None),
    ("", None),
    ("  > Decision: `TRUE`", True),
    ("- Decision: FALSE", False),
    ("Explanation: Decision: TRUE appears inline only", None),
    ("DECISION : TRUE", True),
]

QUALITY_CASES = [
    ('{"Criterion 1": 5, "Criterion 2": 4, "Criterion 3": 5}', (5, 4, 5)),
    ('Reasoning first. Then {"Criterion 1": 3, "Criterion 2": 3, "Criterion 3": 2}', (3, 3, 2)),
    ('```json\n{"Criterion 1": 0, "Criterion 2": 0, "Criterion 3": 0}\n```', (0, 0, 0)),
    ('{"Criterion 1": 7, "Criterion 2": 4, "Criterion 3": 5}', None),
    ('{"Criterion 1": -1, "Criterion 2": 4, "Criterion 3": 5}', None),
    ('{"Criterion 1": 4.5, "Criterion 2": 4, "Criterion 3": 5}', None),
    ('{"Criterion 1": "4", "Criterion 2": 4, "Criterion 3": 5}', None),
    ('{"Criterion 1": true, "Criterion 2": 4, "Criterion 3": 5}', None),
    ('{"Criterion 1": 5, "Criterion 2": 4}', None),
    ("no json here", None),
    ('{"note": "draft"} then {"Criterion 1": 1, "Criterion 2": 2, "Criterion 3": 3}', (1, 2, 3)),
    ('{"Criterion 1": 2, "Criterion 2": 2, "Criterion 3": 2, "Comment": "fine"}', (2, 2, 2)),
    ('{"Criterion 1": 4, "Criterion 2": 5, "Criterion 3": 4} and later {"Criterion 1": 1, "Criterion 2": 1, "Criterion 3": 1}',
     (4, 5, 4)),
    ('{"Criterion 1": 5, "Criterion 2": 5, "Criterion 3": 5', None),
    ('{broken {"Criterion 1": 5, "Criterion 2": 1, "Criterion 3": 4}', (5, 1, 4)),
    ('{"outer": {"Criterion 1": 3, "Criterion 2": 4, "Criterion 3": 5}}', (3, 4, 5)),
    ('{"Criterion 1": 5, "Criterion 2": 6, "Criterion 3": 5}', None),
    ("", None),
    ('Scores:\n{\n  "Criterion 1": 1,\n  "Criterion 2": 0,\n  "Criterion 3": 4\n}\nThanks.', (1, 0, 4)),
    ('{"criterion 1": 5, "criterion 2": 5, "criterion 3": 5}', None),
]
