#!/usr/bin/env python3
"""Emit data/ieee34.json from the published IEEE 34-node test feeder tables.

Conventions baked into the network format:
  - line matrices are per mile; `length` is the multiplier in miles
  - distributed loads are split 50/50 between the two end buses of their
    segment, then merged per (bus, connection, model)
  - delta load entries are keyed by the leading phase of the pair
    (A -> AB, B -> BC, C -> CA)
  - transformer series impedance is per-unit on the system power base
  - regulator taps default to the values found by the LDC control loop in
    scripts/solve_reference.py --find-taps (settings from the regulator table)
"""

import json
import math
import os
import sys

SBASE_MVA = 2.5

# Overhead line configurations: config id -> (phases, z 3x3 ohm/mile, b 3x3 uS/mile)
# Absent-phase rows/cols are zero.
Z300 = [
    [1.3368 + 1.3343j, 0.2101 + 0.5779j, 0.2130 + 0.5015j],
    [0.2101 + 0.5779j, 1.3238 + 1.3569j, 0.2066 + 0.4591j],
    [0.2130 + 0.5015j, 0.2066 + 0.4591j, 1.3294 + 1.3471j],
]
B300 = [
    [5.3350, -1.5313, -0.9943],
    [-1.5313, 5.0979, -0.6212],
    [-0.9943, -0.6212, 4.8880],
]
Z301 = [
    [1.9300 + 1.4115j, 0.2327 + 0.6442j, 0.2359 + 0.5691j],
    [0.2327 + 0.6442j, 1.9157 + 1.4281j, 0.2288 + 0.5238j],
    [0.2359 + 0.5691j, 0.2288 + 0.5238j, 1.9219 + 1.4209j],
]
B301 = [
    [5.1207, -1.4364, -0.9402],
    [-1.4364, 4.9055, -0.5951],
    [-0.9402, -0.5951, 4.7154],
]

def single(ph, z, b):
    i = "ABC".index(ph)
    Z = [[0j] * 3 for _ in range(3)]
    B = [[0.0] * 3 for _ in range(3)]
    Z[i][i] = z
    B[i][i] = b
    return ("ABC"[i], Z, B)

CONFIGS = {
    300: ("ABC", Z300, B300),
    301: ("ABC", Z301, B301),
    302: single("A", 2.7995 + 1.4855j, 4.2251),
    303: single("B", 2.7995 + 1.4855j, 4.2251),
    304: single("B", 1.9217 + 1.4212j, 4.3637),
}

# from, to, length(ft), config  -- the 10 ft 814-850 / 852-832 entries of the
# published table are carried by the regulators (radial branch set keeps one
# branch per bus pair).
LINES = [
    ("800", "802", 2580, 300),
    ("802", "806", 1730, 300),
    ("806", "808", 32230, 300),
    ("808", "810", 5804, 303),
    ("808", "812", 37500, 300),
    ("812", "814", 29730, 300),
    ("816", "818", 1710, 302),
    ("816", "824", 10210, 301),
    ("818", "820", 48150, 302),
    ("820", "822", 13740, 302),
    ("824", "826", 3030, 303),
    ("824", "828", 840, 301),
    ("828", "830", 20440, 301),
    ("830", "854", 520, 301),
    ("832", "858", 4900, 301),
    ("834", "860", 2020, 301),
    ("834", "842", 280, 301),
    ("836", "840", 860, 301),
    ("836", "862", 280, 301),
    ("842", "844", 1350, 301),
    ("844", "846", 3640, 301),
    ("846", "848", 530, 301),
    ("850", "816", 310, 301),
    ("854", "856", 23330, 303),
    ("854", "852", 36830, 301),
    ("858", "864", 1620, 302),
    ("858", "834", 5830, 301),
    ("860", "836", 2680, 301),
    ("862", "838", 4860, 304),
    ("888", "890", 10560, 300),
]

# bus order: feeder order of the published one-line diagram
BUSES = ["800", "802", "806", "808", "810", "812", "814", "850", "816", "818",
         "820", "822", "824", "826", "828", "830", "854", "856", "852", "832",
         "858", "864", "834", "842", "844", "846", "848", "860", "836", "840",
         "862", "838", "888", "890"]

# spot loads: bus, model code, per-slot (kW, kvar) for slots A/B/C
SPOT = [
    ("860", "Y-PQ", (20, 16), (20, 16), (20, 16)),
    ("840", "Y-I", (9, 7), (9, 7), (9, 7)),
    ("844", "Y-Z", (135, 105), (135, 105), (135, 105)),
    ("848", "D-PQ", (20, 16), (20, 16), (20, 16)),
    ("890", "D-I", (150, 75), (150, 75), (150, 75)),
    ("830", "D-Z", (10, 5), (10, 5), (25, 10)),
]

# distributed loads: fromtobus, model, slots; split half to each end bus
DISTRIBUTED = [
    ("802", "806", "Y-PQ", (0, 0), (30, 15), (25, 14)),
    ("808", "810", "Y-I", (0, 0), (16, 8), (0, 0)),
    ("818", "820", "Y-Z", (34, 17), (0, 0), (0, 0)),
    ("820", "822", "Y-PQ", (135, 70), (0, 0), (0, 0)),
    ("816", "824", "D-I", (0, 0), (5, 2), (0, 0)),
    ("824", "826", "Y-I", (0, 0), (40, 20), (0, 0)),
    ("824", "828", "Y-PQ", (0, 0), (0, 0), (4, 2)),
    ("828", "830", "Y-PQ", (7, 3), (0, 0), (0, 0)),
    ("854", "856", "Y-PQ", (0, 0), (4, 2), (0, 0)),
    ("832", "858", "D-Z", (7, 3), (2, 1), (6, 3)),
    ("858", "864", "Y-PQ", (2, 1), (0, 0), (0, 0)),
    ("858", "834", "D-PQ", (4, 2), (15, 8), (13, 7)),
    ("834", "860", "D-Z", (16, 8), (20, 10), (110, 55)),
    ("860", "836", "D-PQ", (30, 15), (10, 6), (42, 22)),
    ("836", "840", "D-I", (18, 9), (22, 11), (0, 0)),
    ("862", "838", "Y-PQ", (0, 0), (28, 14), (0, 0)),
    ("842", "844", "Y-PQ", (9, 5), (0, 0), (0, 0)),
    ("844", "846", "Y-PQ", (0, 0), (25, 12), (20, 11)),
    ("846", "848", "Y-PQ", (0, 0), (23, 11), (0, 0)),
]

CAPACITORS = [("844", [100.0, 100.0, 100.0]), ("848", [150.0, 150.0, 150.0])]

# XFM-1: 500 kVA 24.9/4.16 kV, R=1.9% X=4.08% on its own base
XFM = {"from": "832", "to": "888", "kva": 500.0, "kv_high": 24.9, "kv_low": 4.16,
       "r_pct": 1.9, "x_pct": 4.08}

# regulator taps produced by scripts/solve_reference.py --find-taps on this
# same fixture (LDC settings from the regulator table)
REG1_TAPS = [13, 5, 5]
REG2_TAPS = [12, 11, 12]

REGS = [
    {"from": "814", "to": "850", "taps": REG1_TAPS,
     "control": {"vreg_v": 122.0, "bandwidth_v": 2.0, "pt_ratio": 120.0,
                 "ct_primary_a": 100.0, "r_v": 2.7, "x_v": 1.6}},
    {"from": "852", "to": "832", "taps": REG2_TAPS,
     "control": {"vreg_v": 124.0, "bandwidth_v": 2.0, "pt_ratio": 120.0,
                 "ct_primary_a": 100.0, "r_v": 2.5, "x_v": 1.5}},
]


def c2(z):
    return [z.real, z.imag]


def bus_phases():
    """Phase sets implied by line connectivity."""
    ph = {b: set() for b in BUSES}
    ph["800"] = set("ABC")
    for f, t, _, cfg in LINES:
        p = CONFIGS[cfg][0]
        ph[f] |= set(p)
        ph[t] |= set(p)
    for r in REGS:
        ph[r["from"]] |= set("ABC")
        ph[r["to"]] |= set("ABC")
    ph[XFM["from"]] |= set("ABC")
    ph[XFM["to"]] |= set("ABC")
    return {b: "".join(c for c in "ABC" if c in s) for b, s in ph.items()}


def merge_loads():
    """Spot + split distributed loads, merged per (bus, connection, model)."""
    acc = {}

    def add(bus, code, slots, scale):
        conn = "wye" if code[0] == "Y" else "delta"
        model = {"PQ": "pq", "I": "i", "Z": "z"}[code.split("-")[1]]
        key = (bus, conn, model)
        slot_acc = acc.setdefault(key, [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
        for i, (p, q) in enumerate(slots):
            slot_acc[i][0] += p * scale
            slot_acc[i][1] += q * scale

    for bus, code, *slots in SPOT:
        add(bus, code, slots, 1.0)
    for f, t, code, *slots in DISTRIBUTED:
        add(f, code, slots, 0.5)
        add(t, code, slots, 0.5)

    loads = []
    for bus in BUSES:
        for (b, conn, model), slots in acc.items():
            if b != bus:
                continue
            used = [i for i in range(3) if slots[i][0] != 0 or slots[i][1] != 0]
            if not used:
                continue
            touched = set()
            for i in used:
                touched.add("ABC"[i])
                if conn == "delta":
                    touched.add("ABC"[(i + 1) % 3])
            loads.append({
                "bus": bus,
                "phases": [c for c in "ABC" if c in touched],
                "connection": conn,
                "model": model,
                "p_kw": [slots[i][0] for i in range(3)],
                "q_kvar": [slots[i][1] for i in range(3)],
            })
    return loads


def main():
    phases = bus_phases()
    net = {
        "source": {
            "bus": "800",
            "vm_pu": [1.05, 1.05, 1.05],
            "va_deg": [0.0, -120.0, 120.0],
            "power_base_mva": SBASE_MVA,
        },
        "buses": [
            {"id": b, "phases": list(phases[b]),
             "base_kv": 4.16 if b in ("888", "890") else 24.9,
             "is_source": b == "800"}
            for b in BUSES
        ],
        "lines": [],
        "transformers": [],
        "regulators": [],
        "capacitors": [
            {"bus": b, "phases": ["A", "B", "C"], "kvar": kv,
             "status": [True, True, True]}
            for b, kv in CAPACITORS
        ],
        "loads": merge_loads(),
    }

    for f, t, ft, cfg in LINES:
        p, Z, B = CONFIGS[cfg]
        net["lines"].append({
            "from": f, "to": t, "phases": list(p),
            "length": ft / 5280.0,
            "series_impedance": [[c2(Z[i][j]) for j in range(3)] for i in range(3)],
            "shunt_admittance": [[[0.0, B[i][j] * 1e-6] for j in range(3)] for i in range(3)],
        })

    zpu = complex(XFM["r_pct"], XFM["x_pct"]) / 100.0 * (SBASE_MVA * 1000.0 / XFM["kva"])
    net["transformers"].append({
        "from": XFM["from"], "to": XFM["to"],
        "connection_from": "wye-g", "connection_to": "wye-g",
        "kv_high": XFM["kv_high"], "kv_low": XFM["kv_low"],
        "series_impedance": c2(zpu),
    })

    for r in REGS:
        net["regulators"].append({
            "from": r["from"], "to": r["to"], "phases": ["A", "B", "C"],
            "taps": r["taps"], "step": 0.00625, "control": r["control"],
        })

    out = os.path.join(os.path.dirname(__file__), "..", "data", "ieee34.json")
    out = os.path.normpath(sys.argv[1] if len(sys.argv) > 1 else out)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as fh:
        json.dump(net, fh, indent=1, sort_keys=True)
        fh.write("\n")

    tot_p = sum(l["p_kw"][i] for l in net["loads"] for i in range(3))
    tot_q = sum(l["q_kvar"][i] for l in net["loads"] for i in range(3))
    print(f"wrote {out}: {len(net['buses'])} buses, {len(net['lines'])} lines, "
          f"total load {tot_p:.1f} kW / {tot_q:.1f} kvar")
    assert abs(tot_p - 1769.0) < 1e-9 and abs(tot_q - 1044.0) < 1e-9, "load table sum drifted"


if __name__ == "__main__":
    main()
