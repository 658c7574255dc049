"""Mean total eMBB throughput against the URLLC delay bound."""
from _common import dump, parser, progress

from noma_coexist.trends import dmax_trend

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--bandwidth", type=float, default=10e6, help="Hz; sets the URLLC rate target")
    args = p.parse_args()
    t = dmax_trend(range(args.seeds), bandwidth_hz=args.bandwidth, progress=progress)
    print(t.table())
    print("non-decreasing:", t.non_decreasing())
    dump(t, args.out)
