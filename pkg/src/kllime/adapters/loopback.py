"""Loopback adapter: serves a built-in posterior over the wire protocol."""
import argparse
import json

from ..adapter import format_predictions, serve_main
from ..divergence import BERNOULLI, GAUSSIAN
from ..models import BayesLogisticPosterior, posterior_from_dict, predict


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m kllime.adapters.loopback")
    ap.add_argument("--model", required=True, help="built-in model JSON file")
    ap.add_argument("--num-samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0, help="posterior sampling seed")
    ap.add_argument("--listen", help="serve one TCP client at host:port instead of stdio")
    args = ap.parse_args(argv)
    with open(args.model) as fh:
        post = posterior_from_dict(json.load(fh))
    family = BERNOULLI if isinstance(post, BayesLogisticPosterior) else GAUSSIAN

    def respond(Z):
        return format_predictions(predict(post, Z, args.num_samples, args.seed))

    serve_main(respond, family, args.num_samples, args.listen)


if __name__ == "__main__":
    main()
