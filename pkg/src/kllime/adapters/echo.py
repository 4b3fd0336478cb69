"""Echo adapter: answers every input with the same predictive parameters.

Values are passed through unchecked, so it doubles as a misbehaving adapter
in tests.
"""
import argparse

from ..adapter import serve_main


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m kllime.adapters.echo")
    ap.add_argument("--family", choices=("bernoulli", "gaussian"), default="bernoulli")
    ap.add_argument("--num-samples", type=int, default=1)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=0.0)
    ap.add_argument("--sigma2", type=float, default=1.0)
    ap.add_argument("--listen", help="serve one TCP client at host:port instead of stdio")
    args = ap.parse_args(argv)
    obj = {"p": args.p} if args.family == "bernoulli" else {"mu": args.mu, "sigma2": args.sigma2}

    def respond(Z):
        row = [dict(obj) for _ in range(Z.shape[0])]
        return {"type": "predictions", "params": [row for _ in range(args.num_samples)]}

    serve_main(respond, args.family, args.num_samples, args.listen)


if __name__ == "__main__":
    main()
