"""Entry point: wrap the module named on the command line and serve stdio.

Usage::

    python -m simadapter WRAPPED_MODULE [module args...]

``WRAPPED_MODULE`` is an import path (optionally ``module:factory``) whose
factory -- ``make_system`` by default -- receives the remaining arguments and
returns ``(state_dim, step_fn)``.  Example::

    python -m simadapter simadapter.demos.cubic --dim 2
"""

import importlib
import sys

from .server import serve


def load_system(target, argv):
    module_name, _, factory_name = target.partition(":")
    module = importlib.import_module(module_name)
    factory = getattr(module, factory_name or "make_system")
    return factory(argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print("usage: python -m simadapter WRAPPED_MODULE [args...]", file=sys.stderr)
        return 2
    state_dim, step_fn = load_system(argv[0], argv[1:])
    serve(step_fn, state_dim)
    return 0


if __name__ == "__main__":
    sys.exit(main())
