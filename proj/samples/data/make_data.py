"""Regenerates the toy drug/dosage corpus and embedding table in this directory."""
import random

DRUGS = "aspirin metformin insulin warfarin lisinopril heparin ibuprofen morphine digoxin amoxicillin prednisone atenolol".split()
UNITS = "mg ml mcg units".split()
FILLER = ("the patient was given daily for pain after surgery and reported no side effects of with twice a day "
          "started on stopped nurse noted blood pressure stable orally in morning evening dose reduced to follow "
          "up clinic history recent continue").split()


def sentence(rng):
    kinds = [0] * rng.randint(4, 12)
    for _ in range(rng.randint(0, 2)):
        kinds[rng.randrange(len(kinds))] = 1
    for _ in range(rng.randint(0, 2)):
        kinds[rng.randrange(len(kinds))] = 2
    out = []
    for k in kinds:
        if k == 1:
            out.append((rng.choice(DRUGS), "B-Drug"))
        elif k == 2:
            out += [(str(rng.randint(1, 999)), "B-Dosage"), (rng.choice(UNITS), "I-Dosage")]
        else:
            out.append((rng.choice(FILLER), "O"))
    return out


def write(path, sentences):
    with open(path, "w") as f:
        for s in sentences:
            f.writelines(f"{w}\t{t}\n" for w, t in s)
            f.write("\n")


rng = random.Random(7)
write("train.tsv", [sentence(rng) for _ in range(200)])
write("val.tsv", [sentence(rng) for _ in range(50)])
write("test.tsv", [sentence(rng) for _ in range(50)])
with open("embeddings.txt", "w") as f:
    for w in DRUGS + UNITS + FILLER:
        f.write(w + " " + " ".join(f"{rng.uniform(-1, 1):.4f}" for _ in range(16)) + "\n")
