"""Rectangular cell-centred grid, boundary classification and the
desired-direction field.

Array conventions: cell arrays have shape ``(ny, nx)`` with row 0 at the
bottom of the domain.  Vertical faces ("x-faces") have shape
``(ny, nx + 1)``; face ``[j, i]`` separates cells ``i - 1`` and ``i`` of
row ``j``.  Horizontal faces ("y-faces") have shape ``(ny + 1, nx)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

OPEN, WALL, EXIT = 0, 1, 2
SIDES = ("left", "right", "bottom", "top")
MIN_CELLS = 3


@dataclass(frozen=True)
class GeometrySpec:
    """Declarative description of the domain ``[0, width] x [0, height]``.

    The exit is the part of ``exit_side`` between ``exit_start`` and
    ``exit_end`` (coordinates along that side).  Obstacles are
    axis-aligned rectangles ``(x0, y0, x1, y1)`` rasterised to whole
    cells by cell centre.
    """

    width: float = 2.0
    height: float = 1.0
    nx: int = 100
    ny: int = 50
    exit_side: str = "right"
    exit_start: float = 0.3
    exit_end: float = 0.7
    target: tuple = (2.25, 0.5)
    obstacles: tuple = ()


@dataclass(frozen=True, eq=False)
class Grid2D:
    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple
    active: np.ndarray  # (ny, nx) bool, False on obstacle cells
    face_x: np.ndarray  # (ny, nx+1) OPEN / WALL / EXIT
    face_y: np.ndarray  # (ny+1, nx)
    exit_side: str = "right"

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def xc(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def yc(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy

    def centers(self):
        """Meshgrid of cell centres, each ``(ny, nx)``."""
        return np.meshgrid(self.xc, self.yc)

    @property
    def extent(self):
        x0, y0 = self.origin
        return (x0, x0 + self.nx * self.dx, y0, y0 + self.ny * self.dy)

    def exit_cells(self) -> np.ndarray:
        """Boolean ``(ny, nx)`` mask of cells owning an exit face."""
        m = np.zeros(self.shape, bool)
        m[:, :] |= self.face_x[:, :-1] == EXIT
        m[:, :] |= self.face_x[:, 1:] == EXIT
        m[:, :] |= self.face_y[:-1, :] == EXIT
        m[:, :] |= self.face_y[1:, :] == EXIT
        return m

    def exit_region(self, depth: float) -> np.ndarray:
        """Active cells whose centre lies within ``depth`` of an exit face centre."""
        X, Y = self.centers()
        fx, fy = self.exit_face_centers()
        pts = np.concatenate([fx, fy])
        if len(pts) == 0:
            return np.zeros(self.shape, bool)
        d2 = (X[..., None] - pts[:, 0]) ** 2 + (Y[..., None] - pts[:, 1]) ** 2
        return (d2.min(axis=-1) <= depth * depth) & self.active

    def exit_face_centers(self):
        x0, y0 = self.origin
        jx, ix = np.nonzero(self.face_x == EXIT)
        jy, iy = np.nonzero(self.face_y == EXIT)
        fx = np.column_stack([x0 + ix * self.dx, y0 + (jx + 0.5) * self.dy])
        fy = np.column_stack([x0 + (iy + 0.5) * self.dx, y0 + jy * self.dy])
        return fx.reshape(-1, 2), fy.reshape(-1, 2)


def build_grid(spec: GeometrySpec) -> Grid2D:
    """Classify cells and faces of the rectangle described by ``spec``."""
    if spec.nx < MIN_CELLS or spec.ny < MIN_CELLS:
        raise ConfigError(f"grid must be at least {MIN_CELLS}x{MIN_CELLS}, got {spec.nx}x{spec.ny}")
    if not (spec.width > 0 and spec.height > 0):
        raise ConfigError("domain width and height must be positive")
    nx, ny = int(spec.nx), int(spec.ny)
    dx, dy = spec.width / nx, spec.height / ny
    xc = (np.arange(nx) + 0.5) * dx
    yc = (np.arange(ny) + 0.5) * dy
    X, Y = np.meshgrid(xc, yc)

    active = np.ones((ny, nx), bool)
    for rect in spec.obstacles:
        x0, y0, x1, y1 = rect
        if not (x0 < x1 and y0 < y1):
            raise ConfigError(f"obstacle {rect} is not a proper rectangle (need x0<x1, y0<y1)")
        active &= ~((X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1))
    if not active.any():
        raise ConfigError("obstacles cover the whole domain; no interior cells left")

    face_x = np.full((ny, nx + 1), WALL, np.int8)
    face_y = np.full((ny + 1, nx), WALL, np.int8)
    face_x[:, 1:-1][active[:, :-1] & active[:, 1:]] = OPEN
    face_y[1:-1, :][active[:-1, :] & active[1:, :]] = OPEN

    if spec.exit_side not in SIDES:
        raise ConfigError(f"exit side must be one of {SIDES}, got {spec.exit_side!r}")
    if not spec.exit_start < spec.exit_end:
        raise ConfigError("exit segment needs exit_start < exit_end")
    along, side_len = (yc, spec.height) if spec.exit_side in ("left", "right") else (xc, spec.width)
    if spec.exit_start < 0 or spec.exit_end > side_len:
        raise ConfigError(f"exit segment [{spec.exit_start}, {spec.exit_end}] leaves the "
                          f"{spec.exit_side} side (length {side_len})")
    sel = (along >= spec.exit_start) & (along <= spec.exit_end)
    if not sel.any():
        raise ConfigError("exit segment is narrower than one cell")
    if spec.exit_side == "left":
        owners = active[sel, 0]
    elif spec.exit_side == "right":
        owners = active[sel, -1]
    elif spec.exit_side == "bottom":
        owners = active[0, sel]
    else:
        owners = active[-1, sel]
    if not owners.all():
        raise ConfigError("exit segment overlaps an obstacle")
    if spec.exit_side == "left":
        face_x[sel, 0] = EXIT
    elif spec.exit_side == "right":
        face_x[sel, -1] = EXIT
    elif spec.exit_side == "bottom":
        face_y[0, sel] = EXIT
    else:
        face_y[-1, sel] = EXIT

    return Grid2D(nx, ny, dx, dy, (0.0, 0.0), active, face_x, face_y, spec.exit_side)


@dataclass(frozen=True, eq=False)
class DirectionField:
    """Unit desired direction at cell centres plus its normal component
    on every face.

    ``face_x`` holds the x-component on vertical faces and ``face_y`` the
    y-component on horizontal faces: zero on walls, the outward normal
    on exits, the average of the two neighbouring cell vectors elsewhere.
    """

    nu_x: np.ndarray
    nu_y: np.ndarray
    face_x: np.ndarray
    face_y: np.ndarray
    target: tuple = (np.nan, np.nan)
    into_wall: np.ndarray = field(default=None)

    @property
    def n_into_wall(self) -> int:
        return 0 if self.into_wall is None else int(self.into_wall.sum())


def _inside_closed(g: Grid2D, point) -> bool:
    x0, x1, y0, y1 = g.extent
    return x0 <= point[0] <= x1 and y0 <= point[1] <= y1


def faces_from_cells(g: Grid2D, nu_x: np.ndarray, nu_y: np.ndarray):
    """Average a cell-centred vector field to face normal components
    with the wall/exit conventions applied."""
    ny, nx = g.shape
    fx = np.zeros((ny, nx + 1))
    fy = np.zeros((ny + 1, nx))
    fx[:, 1:-1] = 0.5 * (nu_x[:, :-1] + nu_x[:, 1:])
    fy[1:-1, :] = 0.5 * (nu_y[:-1, :] + nu_y[1:, :])
    fx[g.face_x == WALL] = 0.0
    fy[g.face_y == WALL] = 0.0
    fx[:, 0][g.face_x[:, 0] == EXIT] = -1.0
    fx[:, -1][g.face_x[:, -1] == EXIT] = 1.0
    fy[0, :][g.face_y[0, :] == EXIT] = -1.0
    fy[-1, :][g.face_y[-1, :] == EXIT] = 1.0
    return fx, fy


def direction_field(g: Grid2D, target) -> DirectionField:
    """Unit vectors from every cell centre towards ``target``.

    The target must lie strictly outside the closed domain.  Cells whose
    vector points into an adjacent wall face are flagged in
    ``into_wall`` (the field is not obstacle-aware).
    """
    target = (float(target[0]), float(target[1]))
    if _inside_closed(g, target):
        raise ConfigError(f"direction target {target} must lie outside the closed domain {g.extent}")
    X, Y = g.centers()
    rx, ry = target[0] - X, target[1] - Y
    r = np.hypot(rx, ry)
    nu_x = np.where(g.active, rx / r, 0.0)
    nu_y = np.where(g.active, ry / r, 0.0)
    fx, fy = faces_from_cells(g, nu_x, nu_y)

    into = ((nu_x > 0) & (g.face_x[:, 1:] == WALL)) | ((nu_x < 0) & (g.face_x[:, :-1] == WALL))
    into |= ((nu_y > 0) & (g.face_y[1:, :] == WALL)) | ((nu_y < 0) & (g.face_y[:-1, :] == WALL))
    return DirectionField(nu_x, nu_y, fx, fy, target, into & g.active)


def check_divergence(df: DirectionField, g: Grid2D) -> float:
    """Maximum central-difference divergence over active cells whose
    four neighbours are active; ``-inf`` if no such cell exists."""
    a = g.active
    inner = np.zeros_like(a)
    inner[1:-1, 1:-1] = a[1:-1, 1:-1] & a[1:-1, :-2] & a[1:-1, 2:] & a[:-2, 1:-1] & a[2:, 1:-1]
    div = np.full(a.shape, -np.inf)
    div[1:-1, 1:-1] = ((df.nu_x[1:-1, 2:] - df.nu_x[1:-1, :-2]) / (2 * g.dx)
                       + (df.nu_y[2:, 1:-1] - df.nu_y[:-2, 1:-1]) / (2 * g.dy))
    if not inner.any():
        return float("-inf")
    return float(div[inner].max())
