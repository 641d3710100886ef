"""Where the plan lives inside an encoding's variable numbering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class VariableLayout:
    """Plan-variable ids (DIMACS numbering) per timestep, LSB first."""

    k: int
    action_bits: list[list[int]]
    param_bits: list[list[list[int]]]  # [timestep][slot j-1] -> bits
    extra: dict = field(default_factory=dict)

    def plan_vars(self) -> list[int]:
        out = []
        for i in range(self.k):
            out.extend(self.action_bits[i])
            for bits in self.param_bits[i]:
                out.extend(bits)
        return out

    def roles(self) -> dict[int, tuple]:
        """Inverse map: variable id -> (timestep, role, bit)."""
        inv = {}
        for i in range(self.k):
            for b, v in enumerate(self.action_bits[i]):
                inv[v] = (i, "action", b)
            for j, bits in enumerate(self.param_bits[i], start=1):
                for b, v in enumerate(bits):
                    inv[v] = (i, f"param{j}", b)
        return inv

    def comment_lines(self) -> list[str]:
        lines = []
        for i in range(self.k):
            lines.append(f"action {i} bits {' '.join(map(str, self.action_bits[i]))}".rstrip())
            for j, bits in enumerate(self.param_bits[i], start=1):
                lines.append(f"param {i} {j} bits {' '.join(map(str, bits))}".rstrip())
        return lines

    @classmethod
    def from_comments(cls, comments: list[str]) -> "VariableLayout":
        actions: dict[int, list[int]] = {}
        params: dict[int, dict[int, list[int]]] = {}
        for c in comments:
            parts = c.split()
            if len(parts) >= 3 and parts[0] == "action" and parts[2] == "bits":
                actions[int(parts[1])] = [int(x) for x in parts[3:]]
            elif len(parts) >= 4 and parts[0] == "param" and parts[3] == "bits":
                params.setdefault(int(parts[1]), {})[int(parts[2])] = [int(x) for x in parts[4:]]
        k = len(actions)
        return cls(
            k=k,
            action_bits=[actions[i] for i in range(k)],
            param_bits=[[params.get(i, {})[j] for j in sorted(params.get(i, {}))]
                        for i in range(k)],
        )

    def to_json(self) -> str:
        return json.dumps({"k": self.k, "action_bits": self.action_bits,
                           "param_bits": self.param_bits, **self.extra},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VariableLayout":
        d = json.loads(text)
        k, a, p = d.pop("k"), d.pop("action_bits"), d.pop("param_bits")
        return cls(k, a, p, d)
