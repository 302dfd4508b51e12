"""Subcommands of the `crvae` command line; each module exposes `register` and `run`."""

from . import enhance, evaluate, gen_corpus, gradcheck, train

COMMANDS = (gen_corpus, train, enhance, evaluate, gradcheck)
