"""Check ingestion counts and the method ordering on the Foursquare NYC weekly file.

The file is not shipped; pass its path. Column names that differ from the
canonical ones can be mapped with --column canonical=header (e.g. uid=label).
"""

import argparse
import logging
import sys

from trajshield.data import load_csv, summarize
from trajshield.experiment import (FOURSQUARE_COUNTS, FOURSQUARE_LAT_RANGE, FOURSQUARE_LON_RANGE,
                                   FOURSQUARE_ORDER, full_data_run, ordering_holds)
from trajshield.report import comparison_table


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv")
    ap.add_argument("--column", action="append", default=[], metavar="CANON=HEADER")
    ap.add_argument("--ingest-only", action="store_true")
    ap.add_argument("--gan-epochs", type=int, default=2000)
    ap.add_argument("--tul-epochs", type=int, default=200)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    schema = dict(c.split("=", 1) for c in args.column) or None
    ds = load_csv(args.csv, schema=schema)
    s = summarize(ds)
    ok = True
    for key, want in FOURSQUARE_COUNTS.items():
        good = s[key] == want
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {key}: {s[key]} (expected {want})")
    for key, want in (("lat_range", FOURSQUARE_LAT_RANGE), ("lon_range", FOURSQUARE_LON_RANGE)):
        good = tuple(s[key]) == want
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {key}: {s[key]} (expected {want})")
    if not args.ingest_only:
        reports = full_data_run(ds, gan_epochs=args.gan_epochs, tul_epochs=args.tul_epochs)
        print(comparison_table(reports))
        good = ordering_holds({k: r.acc1 for k, r in reports.items()})
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} ACC@1 ordering: {' > '.join(FOURSQUARE_ORDER)}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
