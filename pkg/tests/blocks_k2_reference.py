"""Hand-written blocks-world (two blocks, k=2) QBF matrix, group by group.

Codes: unstack = 0, stack = 1, b1 = 0, b2 = 1, one bit each.  Every
function takes a mapping from variable names to boolean numpy arrays
(or plain bools) and returns the truth value of one constraint group.
"""

import numpy as np

PLAN_VARS = ["a_0_b0", "x_0_1_b0", "x_0_2_b0", "a_1_b0", "x_1_1_b0", "x_1_2_b0"]
UNIVERSAL_VARS = ["y_1_b0", "y_2_b0"]
PREDICATE_VARS = [f"q_{i}_{p}" for i in range(3) for p in ("clear", "ontable", "on")]
PREFIX_LINES = [
    "exists(" + ", ".join(PLAN_VARS) + ")",
    "forall(" + ", ".join(UNIVERSAL_VARS) + ")",
    "exists(" + ", ".join(PREDICATE_VARS) + ")",
]

B1, B2 = False, True


def _eq(u, v):
    return ~(u ^ v)


def _is(u, code):
    return u if code else ~u


def _implies(a, b):
    return ~a | b


def init_group(v, pred):
    y1, y2 = v["y_1_b0"], v["y_2_b0"]
    q = v[f"q_0_{pred}"]
    holds = {
        "clear": _is(y1, B2),
        "ontable": _is(y1, B1),
        "on": _is(y1, B2) & _is(y2, B1),
    }[pred]
    return _eq(holds, q)


def goal_group(v, pred):
    if pred != "on":
        return np.ones_like(v["y_1_b0"])
    return _implies(_is(v["y_1_b0"], B1) & _is(v["y_2_b0"], B2), v["q_2_on"])


def step_group(v, i, pred):
    stack = v[f"a_{i}_b0"]
    unstack = ~stack
    x1y1 = _eq(v[f"x_{i}_1_b0"], v["y_1_b0"])
    x2y1 = _eq(v[f"x_{i}_2_b0"], v["y_1_b0"])
    x2y2 = _eq(v[f"x_{i}_2_b0"], v["y_2_b0"])
    no = np.zeros_like(stack)
    if pred == "clear":
        pre_p = (stack & (x1y1 | x2y1)) | (unstack & x1y1)
        pre_n = no
        eff_p = unstack & x2y1
        eff_n = stack & x2y1
    elif pred == "ontable":
        pre_p = stack & x1y1
        pre_n = no
        eff_p = unstack & x1y1
        eff_n = stack & x1y1
    else:
        pre_p = unstack & x1y1 & x2y2
        pre_n = no
        eff_p = stack & x1y1 & x2y2
        eff_n = unstack & x1y1 & x2y2
    q0, q1 = v[f"q_{i}_{pred}"], v[f"q_{i + 1}_{pred}"]
    return (_implies(pre_p, q0) & _implies(pre_n, ~q0) & _implies(eff_p, q1)
            & _implies(eff_n, ~q1) & (_eq(q0, q1) | eff_p | eff_n))


def matrix(v):
    out = np.ones_like(v["y_1_b0"])
    for pred in ("clear", "ontable", "on"):
        out = out & init_group(v, pred) & goal_group(v, pred)
        for i in range(2):
            out = out & step_group(v, i, pred)
    # both counts are powers of two, so there is no range restriction
    return out
