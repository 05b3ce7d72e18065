class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit code 2."""


class DomainError(ValueError):
    """A domain operator received inputs it cannot handle."""


class CatalogError(ValueError):
    """Catalog or user-pool file is unreadable or violates an invariant."""
