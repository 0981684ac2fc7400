"""Write the seeded planted desk dataset as CSV plus its category vocabulary."""

import argparse
from dataclasses import fields

from trajshield.data import summarize, write_csv, write_vocabulary
from trajshield.planted import PlantedConfig, planted_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="planted.csv")
    ap.add_argument("--vocab-out", help="default: <out>.vocab")
    for f in fields(PlantedConfig):
        if isinstance(f.default, (int, float)):
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    args = ap.parse_args()
    cfg = PlantedConfig(**{f.name: getattr(args, f.name) for f in fields(PlantedConfig)
                           if hasattr(args, f.name)})
    ds = planted_dataset(cfg)
    write_csv(ds.trajectories, ds.category_vocab, args.out)
    write_vocabulary(ds.category_vocab, args.vocab_out or f"{args.out}.vocab")
    s = summarize(ds)
    print(f"{args.out}: {s['users']} users, {s['trajectories']} trajectories, {s['points']} points")


if __name__ == "__main__":
    main()
