"""Writes the highD-format fixtures used by the ingest tests."""

HEADER = "frame,id,x,y,width,height,xVelocity,yVelocity,laneId"
FPS = 25.0


def rows_small():
    # two vehicles, five frames each, lower carriageway
    out = []
    for vid, (x0, lane, v) in {1: (100.0, 6, 30.0), 2: (140.0, 7, 25.0)}.items():
        for f in range(5):
            y = 10.0 + 3.75 * (lane - 6)
            out.append((f, vid, x0 + v * f / FPS, y, 4.5, 2.0, v, 0.0, lane))
    return out


def rows_large():
    # four vehicles, fifty frames each, upper carriageway (travel toward -x);
    # vehicle 1 moves from lane 2 to lane 3 at frame 20 and stays there
    spec = {1: (400.0, 2, -30.0), 2: (440.0, 2, -27.0), 3: (380.0, 3, -32.0), 4: (470.0, 4, -29.0)}
    out = []
    for vid, (x0, lane0, v) in spec.items():
        for f in range(50):
            lane = 3 if vid == 1 and f >= 20 else lane0
            y = 1.0 + 3.75 * (lane - 2)
            out.append((f, vid, x0 + v * f / FPS, y, 4.5, 2.0, v, 0.0, lane))
    return out


def write(name, rows):
    with open(name, "w") as fh:
        fh.write(HEADER + "\n")
        for r in sorted(rows):
            fh.write(",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in r) + "\n")


if __name__ == "__main__":
    write("tracks_small.csv", rows_small())
    write("tracks_upper.csv", rows_large())
