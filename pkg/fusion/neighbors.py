"""The eight neighbours of a 3x3 window."""

from common.errors import InputDataError

# row-major around the centre, centre excluded
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
)


class BoundaryCellError(InputDataError):
    """Raised when a window centre lies on the grid boundary."""

    def __init__(self, center: tuple[int, int], shape: tuple[int, int]) -> None:
        """Initialise with the centre ``(row, col)`` and grid ``(rows, cols)``."""
        self.center = center
        self.shape = shape
        super().__init__(
            f"cell {center} is on the boundary of a {shape[0]}x{shape[1]} grid; "
            f"centres need 1 <= row <= {shape[0] - 2} and "
            f"1 <= col <= {shape[1] - 2}"
        )


def is_interior(center: tuple[int, int], shape: tuple[int, int]) -> bool:
    """True when all eight neighbours of ``center`` lie on the grid."""
    n, m = center
    return 1 <= n <= shape[0] - 2 and 1 <= m <= shape[1] - 2


def neighbor_coords(
    center: tuple[int, int], shape: tuple[int, int]
) -> list[tuple[int, int]]:
    """Grid indices of the eight neighbours of ``center``.

    Args:
        center: ``(row, col)`` of the window centre.
        shape: ``(rows, cols)`` of the grid.

    Returns:
        Neighbour indices, row-major with the centre skipped.

    Raises:
        BoundaryCellError: If ``center`` is not an interior cell.
    """
    if not is_interior(center, shape):
        raise BoundaryCellError(center, shape)
    n, m = center
    return [(n + dn, m + dm) for dn, dm in NEIGHBOR_OFFSETS]


def interior_cells(shape: tuple[int, int]) -> list[tuple[int, int]]:
    """All interior cells in row-major order."""
    return [(n, m) for n in range(1, shape[0] - 1) for m in range(1, shape[1] - 1)]
