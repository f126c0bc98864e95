"""Thin command-line client for the specification-search service.

Every subcommand builds a JSON request, sends it over HTTP, and formats the
response; computation happens in the service.  Without ``--server`` the
service app is mounted in-process (same request/response path, no socket),
so the CLI works standalone; with ``--server`` it talks to a running
instance (see ``ergmsearch serve``).

Exit codes: 0 success; 2 input/validation problems; 3-6 pipeline stage
failures (I-IV); 1 anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import httpx

STAGE_EXIT_CODES = {"stage1": 3, "stage2": 4, "stage3": 5, "stage4": 6}


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    from .service import in_process_client
    return in_process_client(timeout=3600.0)


def _network_payload(args) -> dict:
    if getattr(args, "dataset", None):
        return {"dataset": args.dataset, "directed": bool(args.directed)}
    if not args.edges:
        raise SystemExit("either --dataset or --edges is required")
    payload = {"edge_csv": Path(args.edges).read_text(),
               "directed": bool(args.directed)}
    if getattr(args, "attrs", None):
        payload["attr_csv"] = Path(args.attrs).read_text()
    return payload


def _proposer_payload(args) -> dict:
    out = {"kind": args.proposer}
    if args.proposer == "remote":
        out["endpoint"] = args.endpoint
        out["model"] = args.model
    return out


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(2)
    return resp.json()


def _emit(data: dict, out: Optional[str], filename: str) -> None:
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        target = path / filename
        target.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        print(f"wrote {target}")


def _add_network_args(p: argparse.ArgumentParser):
    p.add_argument("--edges", help="edge list file (src,dst per line)")
    p.add_argument("--attrs", help="attribute table (node,attr1,... header)")
    p.add_argument("--directed", action="store_true")
    p.add_argument("--dataset", help="bundled dataset name instead of files")


def _add_proposer_args(p: argparse.ArgumentParser):
    p.add_argument("--proposer", choices=["heuristic", "remote"],
                   default="heuristic")
    p.add_argument("--endpoint", help="chat-completion URL (remote proposer)")
    p.add_argument("--model", help="model name for the remote proposer")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--server", help="service base URL (default: in-process)")
    p.add_argument("--seed", type=int, default=1729)
    p.add_argument("--out", help="directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergmsearch",
        description="Guarded ERGM specification search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)

    p = sub.add_parser("diagnose", help="structural diagnostics and metadata")
    _add_network_args(p)
    _add_common(p)

    p = sub.add_parser("universe", help="admissible term universe")
    _add_network_args(p)
    _add_common(p)

    p = sub.add_parser("screen", help="Stages I-II: generate and screen")
    _add_network_args(p)
    _add_proposer_args(p)
    _add_common(p)
    p.add_argument("--query", default="", help="informal context description")

    p = sub.add_parser("fit", help="fit one specification")
    _add_network_args(p)
    _add_common(p)
    p.add_argument("--terms", required=True,
                   help="comma-separated canonical terms")
    p.add_argument("--method", choices=["mple", "mcmle", "exact"],
                   default="mple")

    p = sub.add_parser("gof", help="goodness of fit for a fitted model")
    _add_network_args(p)
    _add_common(p)
    p.add_argument("--fit", dest="fit_file", help="fit.json from `fit`")
    p.add_argument("--terms", help="comma-separated terms (with --theta)")
    p.add_argument("--theta", help="comma-separated coefficients")
    p.add_argument("--tau", type=float, default=2.5)
    p.add_argument("--draws", type=int, default=200)

    p = sub.add_parser("refine", help="Stage III refinement of a screened pool")
    _add_network_args(p)
    _add_proposer_args(p)
    _add_common(p)
    p.add_argument("--screen", dest="screen_file", required=True,
                   help="screen.json from `screen`")
    p.add_argument("--query", default="")
    p.add_argument("--tau", type=float, default=2.5)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--fallback", type=int, default=3)

    p = sub.add_parser("explain", help="Stage IV mechanism summary")
    _add_network_args(p)
    _add_proposer_args(p)
    _add_common(p)
    p.add_argument("--fit", dest="fit_file", help="fit.json from `fit`")
    p.add_argument("--terms")
    p.add_argument("--theta")

    p = sub.add_parser("run", help="full pipeline, Stages I-IV")
    _add_network_args(p)
    _add_proposer_args(p)
    _add_common(p)
    p.add_argument("--query", default="")
    p.add_argument("--tau", type=float, default=2.5)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--fallback", type=int, default=3)
    return parser


def _fit_terms_theta(args) -> tuple[list[str], list[float]]:
    if args.fit_file:
        fit = json.loads(Path(args.fit_file).read_text())
        fit = fit.get("fit", fit)
        terms = fit["terms"]
        theta = [float(fit["coefficients"][t]) for t in terms]
        return terms, theta
    if not args.terms or not args.theta:
        raise SystemExit("provide --fit or both --terms and --theta")
    terms = [t.strip() for t in args.terms.split(",")]
    theta = [float(x) for x in args.theta.split(",")]
    return terms, theta


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn
        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    client = _client(args.server)
    try:
        if args.command == "diagnose":
            data = _post(client, "/diagnose",
                         {"network": _network_payload(args)})
            print(json.dumps(data, indent=2, sort_keys=True))
            _emit(data, args.out, "diagnostics.json")

        elif args.command == "universe":
            data = _post(client, "/universe",
                         {"network": _network_payload(args)})
            for term in data["terms"]:
                print(term)
            _emit(data, args.out, "universe.json")

        elif args.command == "screen":
            data = _post(client, "/screen", {
                "network": _network_payload(args),
                "query_text": args.query,
                "proposer": _proposer_payload(args),
                "seed": args.seed})
            print(f"baseline BIC_s: {data['baseline_bic_s']:.3f}")
            for cand in data["pool"]:
                status = cand["screen_status"]
                why = f" ({cand['screen_reason']})" if cand["screen_reason"] else ""
                bic = (f" BIC_s={cand['bic_s']:.3f}"
                       if cand["bic_s"] is not None else "")
                print(f"  [{status}]{bic} {cand['terms'] or cand['raw_terms']}{why}")
            print(f"selected: {data['selected']}")
            _emit(data, args.out, "screen.json")

        elif args.command == "fit":
            terms = [t.strip() for t in args.terms.split(",")]
            data = _post(client, "/fit", {
                "network": _network_payload(args),
                "terms": terms, "method": args.method, "seed": args.seed})
            fit = data["fit"]
            for term, coef in fit["coefficients"].items():
                print(f"{term}\t{coef}")
            print(f"method={fit['method']} converged={fit['converged']} "
                  f"bic={fit['bic']}")
            _emit(data, args.out, "fit.json")

        elif args.command == "gof":
            terms, theta = _fit_terms_theta(args)
            data = _post(client, "/gof", {
                "network": _network_payload(args), "terms": terms,
                "theta": theta, "seed": args.seed, "tau": args.tau,
                "draws": args.draws})
            print(data["tsv"], end="")
            report = data["gof"]
            print(f"max|z|={report['max_abs_z']} adequate={report['adequate']} "
                  f"degenerate={report['degenerate']}")
            if args.out:
                path = Path(args.out)
                path.mkdir(parents=True, exist_ok=True)
                (path / "gof_final.tsv").write_text(data["tsv"])
                print(f"wrote {path / 'gof_final.tsv'}")

        elif args.command == "refine":
            screen_data = json.loads(Path(args.screen_file).read_text())
            data = _post(client, "/refine", {
                "network": _network_payload(args),
                "survivors": screen_data["survivors"],
                "query_text": args.query,
                "proposer": _proposer_payload(args),
                "seed": args.seed, "tau": args.tau, "rounds": args.rounds,
                "fallback": args.fallback})
            for entry in data["edit_log"]:
                print(f"round {entry['round']}: {entry['edit']['edit_type']} "
                      f"-> {entry['decision']} ({entry['reason']})")
            print(f"final: {', '.join(data['final_terms'])}")
            _emit(data, args.out, "refine.json")

        elif args.command == "explain":
            terms, theta = _fit_terms_theta(args)
            data = _post(client, "/explain", {
                "network": _network_payload(args), "terms": terms,
                "theta": theta, "proposer": _proposer_payload(args)})
            print(data["summary"]["paragraph"])
            _emit(data, args.out, "explain.json")

        elif args.command == "run":
            data = _post(client, "/run", {
                "network": _network_payload(args),
                "query_text": args.query,
                "proposer": _proposer_payload(args),
                "seed": args.seed, "tau": args.tau, "rounds": args.rounds,
                "fallback": args.fallback})
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                for name, content in data["artifacts"].items():
                    (out / name).write_text(content)
                print(f"artifacts written to {out}")
            if data["status"] != "ok":
                print(f"run failed at {data['failed_stage']}: "
                      f"{data['failure_reason']}", file=sys.stderr)
                return STAGE_EXIT_CODES.get(data["failed_stage"], 1)
            final = data["run"]["final"]
            print(f"final specification: {', '.join(final['terms'])}")
            print(f"BIC_f: {final['fit']['bic']}  "
                  f"max|z|: {final['gof']['max_abs_z']}  "
                  f"adequate: {final['gof']['adequate']}")
    finally:
        client.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
