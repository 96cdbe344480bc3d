"""Generate a deterministic Paquid-shaped demo dataset.

Layout: 500 subjects, 2,250 visit rows, 12 columns, exactly 726 missing
cells written as R-style `NA`. Values are synthetic; only the shape and the
coding conventions (male/CEP in {0,1}, MMSE in 0..30) follow the public
lcmm::paquid table.
"""
import csv
import random
import sys

N_SUBJECTS = 500
N_ROWS = 2250
N_MISSING = 726
WAVE_OFFSETS = [0, 1, 3, 5, 8, 10, 13, 15, 17]
COLUMNS = ["ID", "CEP", "male", "age", "wave", "MMSE", "BVRT", "IST",
           "HIER", "CESD", "agedem", "dem"]
MISSABLE = ["MMSE", "BVRT", "IST", "HIER", "CESD"]


def main(out):
    rng = random.Random(20240613)
    counts = [rng.randint(1, 9) for _ in range(N_SUBJECTS)]
    while sum(counts) != N_ROWS:
        i = rng.randrange(N_SUBJECTS)
        if sum(counts) > N_ROWS and counts[i] > 1:
            counts[i] -= 1
        elif sum(counts) < N_ROWS and counts[i] < 9:
            counts[i] += 1

    rows = []
    for sid, n in enumerate(counts, start=1):
        cep = int(rng.random() < 0.72)
        male = int(rng.random() < 0.42)
        age0 = rng.uniform(65.0, 92.0)
        base = min(30.0, max(4.0, rng.gauss(26.5 + 1.2 * cep, 3.5)))
        slope = rng.uniform(0.0, 1.4)
        dem = int(rng.random() < 0.18)
        for w in range(n):
            age = age0 + WAVE_OFFSETS[w] + rng.uniform(-0.3, 0.3)
            mmse = round(base - slope * WAVE_OFFSETS[w] + rng.gauss(0, 1.5))
            mmse = min(30, max(0, mmse))
            rows.append({
                "ID": sid,
                "CEP": cep,
                "male": male,
                "age": f"{age:.4f}",
                "wave": w + 1,
                "MMSE": mmse,
                "BVRT": min(15, max(0, round(rng.gauss(10.5, 2.5)))),
                "IST": min(40, max(0, round(rng.gauss(28, 6)))),
                "HIER": rng.choice([1, 1, 1, 1, 2, 2, 3, 4]),
                "CESD": min(52, max(0, round(abs(rng.gauss(6, 7))))),
            })
        last_age = float(rows[-1]["age"])
        agedem = last_age + (rng.uniform(0.1, 2.0) if dem else 0.0)
        for r in rows[-n:]:
            r["agedem"] = f"{agedem:.4f}"
            r["dem"] = dem

    cells = [(i, c) for i in range(N_ROWS) for c in MISSABLE]
    for i, c in rng.sample(cells, N_MISSING):
        rows[i][c] = "NA"

    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "paquid.csv")
