"""Reference computations written independently of the package code."""
import cmath
import math


def arc_endpoint(x, y, h, vL, vR, base, dt):
    """Unicycle endpoint via the turning-radius form (R = v / w).

    R = v / w cancels badly on nearly straight arcs, so those integrate
    exp(i(h + w t)) term by term instead.
    """
    v = (vL + vR) / 2.0
    w = (vR - vL) / base
    if abs(w * dt) < 1e-3:
        total = sum((1j * w) ** k * dt ** (k + 1) / math.factorial(k + 1) for k in range(6))
        z = v * cmath.exp(1j * h) * total
        return x + z.real, y + z.imag, h + w * dt
    R = v / w
    h2 = h + w * dt
    return x + R * (math.sin(h2) - math.sin(h)), y - R * (math.cos(h2) - math.cos(h)), h2


def angle_diff(a, b):
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def ray_segment(ox, oy, dx, dy, ax, ay, bx, by):
    """Distance along the ray to the segment, or None."""
    ex, ey = bx - ax, by - ay
    den = dx * ey - dy * ex
    if den == 0.0:
        return None
    t = ((ax - ox) * ey - (ay - oy) * ex) / den
    s = ((ax - ox) * dy - (ay - oy) * dx) / den
    if t >= 0.0 and -1e-12 <= s <= 1 + 1e-12:
        return t
    return None


def ray_hit(width, height, polygons, discs, ox, oy, angle):
    """Brute force: every wall, every polygon edge, every disc."""
    dx, dy = math.cos(angle), math.sin(angle)
    best = math.inf
    walls = [(0, 0, width, 0), (width, 0, width, height), (width, height, 0, height), (0, height, 0, 0)]
    for poly in polygons:
        n = len(poly)
        walls += [(*poly[i], *poly[(i + 1) % n]) for i in range(n)]
    for seg in walls:
        t = ray_segment(ox, oy, dx, dy, *seg)
        if t is not None:
            best = min(best, t)
    for cx, cy, r in discs:
        fx, fy = ox - cx, oy - cy
        b = fx * dx + fy * dy
        c = fx * fx + fy * fy - r * r
        disc = b * b - c
        if disc >= 0:
            t = -b - math.sqrt(disc)
            if t >= 0:
                best = min(best, t)
    return best


def regular_polygon_points(n, radius, cx=0.0, cy=0.0, phase=0.0):
    return [(cx + radius * math.cos(phase + 2 * math.pi * k / n),
             cy + radius * math.sin(phase + 2 * math.pi * k / n)) for k in range(n)]
