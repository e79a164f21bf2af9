#!/usr/bin/env python3
"""Regenerates the toy corpus and matching subword vocab under data/toy/.

The corpus is 40 single-sentence documents over a closed vocabulary with six
entity types, small enough for overfitting checks but covering multi-token
mentions, numbers, and every type in both slots.
"""

import itertools
import os

POOLS = {
    "disease": ["cystic fibrosis", "diabetes", "asthma", "chronic bronchitis", "pneumonia"],
    "drug": ["aspirin", "ibuprofen", "insulin", "beta blockers", "heparin"],
    "symptom": ["chest pain", "fever", "shortness of breath", "nausea", "fatigue"],
    "procedure": ["chest radiography", "blood transfusion", "dialysis", "biopsy", "intubation"],
    "anatomy": ["left lung", "liver", "kidney", "upper airway", "spleen"],
    "measure": ["blood pressure", "heart rate", "oxygen saturation", "serum glucose", "temperature"],
}

TEMPLATES = [
    ("The patient with {0} reported {1} .", "disease", "symptom"),
    ("Treatment with {0} improved {1} .", "drug", "measure"),
    ("A {0} revealed damage to the {1} .", "procedure", "anatomy"),
    ("{0} worsened despite {1} therapy .", "symptom", "drug"),
    ("The {0} showed signs of {1} .", "anatomy", "disease"),
    ("{0} of 180 was recorded during {1} .", "measure", "procedure"),
    ("Severe {0} followed the {1} .", "symptom", "procedure"),
    ("{0} was given for {1} .", "drug", "disease"),
]


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "data", "toy")
    os.makedirs(out_dir, exist_ok=True)

    counters = {t: itertools.cycle(range(len(POOLS[t]))) for t in POOLS}
    blocks = []
    concept = itertools.count(1)
    for i in range(40):
        template, t0, t1 = TEMPLATES[i % len(TEMPLATES)]
        m0 = POOLS[t0][next(counters[t0])]
        m1 = POOLS[t1][next(counters[t1])]
        sentence = template.format(m0, m1)
        doc_id = str(90000001 + i)
        lines = [f"{doc_id}|t|{sentence}"]
        for surface, mtype in ((m0, t0), (m1, t1)):
            start = sentence.index(surface)
            end = start + len(surface)
            assert sentence[start:end] == surface
            lines.append(f"{doc_id}\t{start}\t{end}\t{surface}\t{mtype}\tC{next(concept):07d}")
        blocks.append("\n".join(lines))

    with open(os.path.join(out_dir, "toy.pubtator"), "w") as f:
        f.write("\n\n".join(blocks) + "\n")

    words = set()
    for block in blocks:
        sentence = block.split("\n")[0].split("|t|", 1)[1]
        words.update(sentence.split())
    words.add("NUM")
    words.discard("180")  # normalized away before subword lookup
    chars = sorted({c for w in words for c in w})
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    vocab += sorted(words)
    vocab += [c for c in chars if c not in words]
    vocab += ["##" + c for c in chars]
    with open(os.path.join(out_dir, "toy_vocab.txt"), "w") as f:
        f.write("\n".join(vocab) + "\n")

    print(f"{len(blocks)} documents, {len(words)} word types, {len(vocab)} subword pieces")


if __name__ == "__main__":
    main()
