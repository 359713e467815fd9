"""Write the 12-class colored-shapes dataset (PNG files plus a JSON-lines manifest)."""
import argparse

from coad.harness.synthetic import write_dataset

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--per-class", type=int, default=50)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(write_dataset(args.out, args.per_class, args.size, args.seed))
