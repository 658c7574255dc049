"""Mean total eMBB throughput against the number of URLLC arrivals (one per mini slot)."""
from _common import dump, parser, progress

from noma_coexist.trends import arrivals_trend

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    t = arrivals_trend(range(args.seeds), progress=progress)
    print(t.table())
    print("non-increasing:", t.non_increasing())
    dump(t, args.out)
