"""Jain index against the number of eMBB users, adaptive and fixed power."""
from _common import dump, parser, progress

from noma_coexist.trends import fairness_trend

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    for sched in ("adaptive", "fixed"):
        t = fairness_trend(range(args.seeds), sched, progress=progress)
        print(t.table())
        print("non-increasing:", t.non_increasing())
        dump(t, args.out and args.out.replace(".json", f"_{sched}.json"))
