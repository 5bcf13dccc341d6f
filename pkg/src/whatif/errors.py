"""Exception hierarchy. Everything raised on bad input derives from ``WhatIfError``."""


class WhatIfError(Exception):
    pass


class TableError(WhatIfError, ValueError):
    """Unreadable, ragged or otherwise malformed input table."""


class SchemaError(WhatIfError, ValueError):
    """Schema file or spec/column mismatch, or a value violating its declared kind."""


class InsufficientDataError(WhatIfError, ValueError):
    pass


class GraphError(WhatIfError, ValueError):
    pass


class InconsistentGraphError(GraphError):
    """A PDAG with no acyclic extension that keeps its v-structures."""


class DegenerateSplitError(WhatIfError, ValueError):
    pass
