import pytest

from advplan.domains import air_cargo_example, random_air_cargo, random_blocks


@pytest.fixture
def cargo():
    return air_cargo_example()


def small_tasks(count: int, seed: int = 0):
    """Mixed air-cargo and blocks tasks small enough for exhaustive oracles."""
    out = []
    for i in range(count):
        s = seed + i
        if i % 3 == 2:
            out.append(random_blocks(3 + (i // 3) % 2, s))
        else:
            out.append(random_air_cargo(1 + i % 2, 1 + (i // 2) % 2, 2 + (i // 4) % 2, s))
    return out


def generated_windows(count: int, seed: int = 0):
    """Half grid windows from random mazes, half normalized STRIPS windows from plan trajectories."""
    import random

    from advplan.grid import generate_maze
    from advplan.planner import OPTIMAL, solve
    from advplan.strips import trajectory
    from advplan.windows import extract_grid_window, extract_strips_window, normalize_window

    rng = random.Random(seed)
    grids, strips = [], []
    s = seed
    while len(grids) < count // 2:
        grid = generate_maze(9, 9, 0.3, s, placement="random")
        s += 1
        free = [c for c in grid.cells() if grid.free(c)]
        for cell in rng.sample(free, min(5, len(free))):
            grids.append(extract_grid_window(grid, cell, 3, rng.choice("NESW")))
    s = seed
    while len(strips) < count - count // 2:
        task = random_air_cargo(2, 2, 3, s) if s % 2 else random_blocks(4, s)
        s += 1
        result = solve(task, OPTIMAL)
        if not result.solved or len(result.plan) < 3:
            continue
        traj = trajectory(task, result.plan)
        for end in range(1, len(traj)):
            w = extract_strips_window(traj, end, 4, truncate=True)
            strips.append(normalize_window(w) if end % 2 else w)
    return grids[: count // 2] + strips[: count - count // 2]


def replan_trajectory(seed, width=15, height=15, heuristic="euclidean"):
    """Walk with D* Lite while inserting random walls.

    Returns ``(pairs, walked)``: one (D* Lite cost, fresh A* cost) pair per
    replan, and whether the steps walked after the last replan match its cost.
    """
    import random

    from advplan.grid import DStarLite, astar_cost, generate_maze

    rng = random.Random(seed)
    grid = generate_maze(width, height, 0.25, seed, placement="random")
    agent = DStarLite(grid, heuristic)
    out = [(agent.cost_to_goal(), astar_cost(grid, agent.position, grid.goal))]
    steps, last = 0, 0
    for _ in range(4 * width * height):
        if agent.position == grid.goal:
            break
        if rng.random() < 0.5:
            options = [c for c in agent.grid.cells()
                       if agent.grid.free(c) and c not in (agent.position, grid.goal, grid.start)]
            agent.add_wall(rng.choice(options))
            g = agent.grid
            out.append((agent.cost_to_goal(), astar_cost(g, agent.position, g.goal)))
            last = steps
        nxt = agent.next_cell()
        if nxt is None:
            break
        agent.move_to(nxt)
        steps += 1
    expected = out[-1][0]
    walked = (steps - last == expected) if agent.position == grid.goal else expected == float("inf")
    return out, walked
