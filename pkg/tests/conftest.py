import pytest

from chemosim.scenarios import builtin_scenario, run_scenario, run_scenario_picard


@pytest.fixture(scope="session")
def mol_runs():
    """Lazily computed, session-shared (report, trajectory) per built-in id."""
    cache = {}

    def get(scenario_id):
        if scenario_id not in cache:
            cache[scenario_id] = run_scenario(builtin_scenario(scenario_id))
        return cache[scenario_id]

    return get


@pytest.fixture(scope="session")
def picard_runs():
    """Lazily computed, session-shared fixed-point trajectories per id/guess."""
    cache = {}

    def get(scenario_id, initial_guess=None):
        key = (scenario_id,
               None if initial_guess is None else float(initial_guess))
        if key not in cache:
            cache[key] = run_scenario_picard(builtin_scenario(scenario_id),
                                             initial_guess=initial_guess)
        return cache[key]

    return get
