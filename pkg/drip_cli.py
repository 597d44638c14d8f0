"""
DRIP Command Line
Run experiment campaigns, solve or validate single scenarios, and dump the
assembled QCQP.

Usage:
    python drip_cli.py run <campaign.cfg> --out DIR [--seed N] [--trials N] [--threads N]
    python drip_cli.py solve <scenario.cfg> [--out DIR] [--seed N]
    python drip_cli.py validate <scenario.cfg>
    python drip_cli.py dump <scenario.cfg> --out DIR

Exit codes: 0 success, 1 configuration error, 2 IO error, 3 failed trial(s).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

from bccd import STATUS_INNER_FAILURE, drip_solve
from beamformer import update_bank
from campaigns import CampaignError, CampaignRunner, load_campaign, write_solve_bundle
from metrics import evaluate_waveform
from qcqp_assembly import assemble, dump_problem
from scenario import ScenarioError, load_scenario
from signals import draw_comm_block, lfm_chirp

logger = logging.getLogger('drip')

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_FAILED = 3


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1 (got {value})")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be unsigned (got {value})")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='drip', description='DRIP space-time ISAC waveform synthesis')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='run an experiment campaign')
    run.add_argument('campaign', type=Path)
    run.add_argument('--out', type=Path, required=True, help='output directory')
    run.add_argument('--seed', type=_seed, help='base seed (overrides the scenario rng_seed)')
    run.add_argument('--trials', type=_positive_int, help='trials per grid point')
    run.add_argument('--threads', type=_positive_int, help='worker threads (default DRIP_THREADS or CPU count)')

    solve = sub.add_parser('solve', help='solve one scenario draw')
    solve.add_argument('scenario', type=Path)
    solve.add_argument('--out', type=Path, help='write the solve bundle here')
    solve.add_argument('--seed', type=_seed, help='override the scenario rng_seed')

    validate = sub.add_parser('validate', help='check a scenario file')
    validate.add_argument('scenario', type=Path)

    dump = sub.add_parser('dump', help='dump the first-iteration QCQP')
    dump.add_argument('scenario', type=Path)
    dump.add_argument('--out', type=Path, required=True)
    dump.add_argument('--seed', type=_seed, help='override the scenario rng_seed')
    return parser


def cmd_run(args) -> int:
    campaign = load_campaign(args.campaign)
    changes = {}
    if args.seed is not None:
        changes['base_scenario'] = campaign.base_scenario.with_overrides(rng_seed=args.seed)
    if args.trials is not None:
        changes['trials'] = args.trials
    if changes:
        campaign = dataclasses.replace(campaign, **changes)
    result = CampaignRunner(campaign, args.out, threads=args.threads).run()
    print(json.dumps({k: result[k] for k in ('status', 'statistics', 'files')}, indent=2))
    return result['exit_code']


def _load(args):
    cfg = load_scenario(args.scenario)
    if getattr(args, 'seed', None) is not None:
        cfg = cfg.with_overrides(rng_seed=args.seed)
    return cfg


def cmd_solve(args) -> int:
    cfg = _load(args)
    comm = draw_comm_block(cfg, np.random.default_rng(cfg.rng_seed))
    x0 = lfm_chirp(cfg)
    result = drip_solve(cfg, comm, x0)
    report = evaluate_waveform(result.waveform.vector_form, result.beamformers, comm, x0.vector_form,
                               cfg, result.feasibility)
    print(json.dumps({'result': result.summary(), 'metrics': report.to_dict()}, indent=2))
    if args.out:
        write_solve_bundle(result, cfg, comm, x0, args.out)
    return EXIT_FAILED if result.status == STATUS_INNER_FAILURE else EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(json.dumps({'valid': True, 'n_vars': cfg.n_vars, 'n_constraints': cfg.n_constraints,
                      'scenario': cfg.to_dict()}, indent=2))
    return EXIT_OK


def cmd_dump(args) -> int:
    cfg = _load(args)
    comm = draw_comm_block(cfg, np.random.default_rng(cfg.rng_seed))
    x0 = lfm_chirp(cfg).vector_form
    prob = assemble(comm.zf_reference.vector_form, x0, update_bank(x0, cfg), cfg)
    path = dump_problem(prob, args.out)
    print(f"QCQP written to {path}")
    return EXIT_OK


COMMANDS = {'run': cmd_run, 'solve': cmd_solve, 'validate': cmd_validate, 'dump': cmd_dump}


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    level = 'DEBUG' if args.verbose else os.getenv('DRIP_LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        return COMMANDS[args.command](args)
    except (ScenarioError, CampaignError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"IO error: {e}")
        return EXIT_IO
    except (ValueError, np.linalg.LinAlgError) as e:
        logger.error(f"Solve failed: {type(e).__name__}: {e}")
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
