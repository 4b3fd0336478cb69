"""Reference adapters: ``python -m kllime.adapters.echo`` and ``.loopback``."""
