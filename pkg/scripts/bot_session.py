"""Drive a full play-service session with four scripted gradient-ascent bots.

Point it at a running service (``shepherd serve``) to sanity-check the
session protocol end to end and cross-check logged welfare against the
library. The bots climb their own return like the simulated participants.

Usage:
    python scripts/bot_session.py --url http://127.0.0.1:8000 \
        --mechanisms Uniform AbsoluteProportional --seed 0
"""

import argparse
import json
import sys
import urllib.request


def api(url, path, payload=None):
    if payload is None:
        with urllib.request.urlopen(url + path) as response:
            return json.loads(response.read())
    data = json.dumps(payload).encode()
    request = urllib.request.Request(
        url + path, data=data, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--url", default="http://127.0.0.1:8000")
    parser.add_argument("--mechanisms", nargs=2, default=["Uniform", "AbsoluteProportional"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--part-lr", type=float, default=0.1)
    args = parser.parse_args()

    import numpy as np

    sys.path.insert(0, "src")
    from shepherd import policies, training

    created = api(
        args.url,
        "/sessions",
        {"mechanisms": args.mechanisms, "seed": args.seed, "tutorial": False},
    )
    session_id = created["session_id"]
    print(f"session {session_id}; phases {created['phases']}")
    tokens = [
        api(args.url, f"/sessions/{session_id}/join", {"name": f"bot{i}"})["token"]
        for i in range(4)
    ]

    env = training.PggEnv()
    rng = np.random.default_rng(args.seed)
    _, rho = env.sample_inner(rng)
    while True:
        view = api(args.url, f"/sessions/{session_id}/state?token={tokens[0]}")
        if view["state"] != "collecting":
            break
        for seat, token in enumerate(tokens):
            api(
                args.url,
                f"/sessions/{session_id}/contribute",
                {"token": token, "contribution": float(rho[seat])},
            )
        outcome = api(args.url, f"/sessions/{session_id}/state?token={tokens[0]}")[
            "outcomes"
        ][-1]
        print(
            f"{outcome['phase']:24s} round {outcome['round']:2d} "
            f"welfare {outcome['welfare']:.4f}"
        )
        # naive ascent against the realized payouts, like the simulated agents
        mech = policies.BaselineMechanism("Uniform")
        grad = training.participant_grad(env, mech, rho)
        rho = np.clip(rho + args.part_lr * grad, 0.0, 1.0)

    log_lines = urllib.request.urlopen(f"{args.url}/sessions/{session_id}/log").read()
    summary = json.loads(log_lines.decode().strip().splitlines()[-1])
    print("per-mechanism welfare:", summary["mean_welfare_per_mechanism"])


if __name__ == "__main__":
    main()
