"""Mean total eMBB throughput of every power scheduler under four staggered arrivals."""
from _common import dump, parser, progress

from noma_coexist.trends import scheduler_trend

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--metric", default="mean_total", choices=["mean_total", "jain"])
    args = p.parse_args()
    t = scheduler_trend(range(args.seeds), metric=args.metric, progress=progress)
    print(t.table())
    dump(t, args.out)
