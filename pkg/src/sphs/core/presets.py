"""Experiment presets - model and training hyperparameters per benchmark system"""

from tabulate import tabulate

from sphs.core.errors import ConfigurationError

# Matrix parametrization per experiment: state-dependent or constant J, R, G.
# "desk_steps" is the reduced step count used for quick reproductions.
EXPERIMENT_PRESETS = {
    "random_init": {
        "title": "Randomly initialized model",
        "regime": None,
        "steps": 0,
        "desk_steps": 0,
        "learning_rate": None,
        "instances": 1,
        "state_dim": 2,
        "input_dim": 0,
        "widths": (16, 16),
        "matrices": {"J": "state_dependent", "R": "state_dependent", "G": "zero"},
    },
    "spinning_body": {
        "title": "Spinning rigid body",
        "regime": "derivative",
        "steps": 50000,
        "desk_steps": 10000,
        "learning_rate": 1e-3,
        # geometric step-size decay from learning_rate to final_learning_rate
        "final_learning_rate": 1e-5,
        "batch_size": 256,
        "epsilon": 1e-3,
        "instances": 10,
        "state_dim": 3,
        "input_dim": 0,
        "widths": (16, 16),
        "matrices": {"J": "state_dependent", "R": "constant", "G": "zero"},
    },
    "cascaded_tanks": {
        "title": "Cascaded tanks",
        "regime": "trajectory",
        "steps": 50000,
        "desk_steps": 5000,
        "learning_rate": 5e-4,
        "instances": 20,
        "state_dim": 2,
        "input_dim": 1,
        "widths": (16, 16),
        "matrices": {"J": "constant", "R": "constant", "G": "constant"},
    },
    "food_processing": {
        "title": "Food processing surrogate",
        "regime": "trajectory",
        "steps": 30000,
        "desk_steps": 3000,
        "learning_rate": 1e-4,
        "instances": 20,
        "state_dim": 2,
        "input_dim": 1,
        "widths": (16, 16),
        "matrices": {"J": "constant", "R": "constant", "G": "constant"},
    },
    "additive_manufacturing": {
        "title": "Additive manufacturing surrogate",
        "regime": "derivative",
        "steps": 20000,
        "desk_steps": 2000,
        "learning_rate": 1e-3,
        "instances": 20,
        "state_dim": 40,
        "input_dim": 40,
        "widths": (32, 32),
        "matrices": {"J": "constant", "R": "constant", "G": "constant"},
        # derivative fitting followed by trajectory fine-tuning
        "finetune": {"regime": "trajectory", "steps": 10000, "desk_steps": 1000, "learning_rate": 1e-5},
    },
}


def list_available_presets():
    """Preset names in table order"""
    return list(EXPERIMENT_PRESETS)


def get_preset(name):
    """
    Look up an experiment preset

    Args:
        name: Preset key, e.g. "spinning_body"

    Returns:
        The preset dictionary

    Raises:
        ConfigurationError: If the preset does not exist
    """
    if name not in EXPERIMENT_PRESETS:
        raise ConfigurationError(
            f"Unknown preset: {name}. Available presets: {', '.join(list_available_presets())}"
        )
    return EXPERIMENT_PRESETS[name]


def preset_model_spec(name, kind="sphnn", **overrides):
    """ModelSpec dictionary for a preset, with optional overrides"""
    preset = get_preset(name)
    spec = {
        "kind": kind,
        "state_dim": preset["state_dim"],
        "input_dim": preset["input_dim"],
        "widths": list(preset["widths"]),
        "j_mode": preset["matrices"]["J"],
        "r_mode": preset["matrices"]["R"],
        "g_mode": preset["matrices"]["G"],
    }
    if "epsilon" in preset:
        spec["epsilon"] = preset["epsilon"]
    spec.update(overrides)
    return spec


def preset_train_config(name, desk=False, **overrides):
    """TrainConfig dictionary for a preset; ``desk`` selects the reduced step count"""
    preset = get_preset(name)
    if preset["regime"] is None:
        raise ConfigurationError(f"Preset {name} has no training stage")
    config = {
        "regime": preset["regime"],
        "steps": preset["desk_steps"] if desk else preset["steps"],
        "learning_rate": preset["learning_rate"],
    }
    for key in ("final_learning_rate", "batch_size"):
        if key in preset:
            config[key] = preset[key]
    config.update(overrides)
    return config


def _abbreviate(mode):
    return {"state_dependent": "s.", "constant": "c.", "zero": "-"}.get(mode, mode)


def format_preset_table():
    """Preset table as text"""
    rows = []
    for name, preset in EXPERIMENT_PRESETS.items():
        steps = "-" if not preset["steps"] else f"{preset['steps']} {preset['regime']}"
        rate = "-" if preset["learning_rate"] is None else f"{preset['learning_rate']:g}"
        if "finetune" in preset:
            stage = preset["finetune"]
            steps += f" + {stage['steps']} {stage['regime']}"
            rate += f" / {stage['learning_rate']:g}"
        elif preset.get("final_learning_rate"):
            rate += f" -> {preset['final_learning_rate']:g}"
        matrices = preset["matrices"]
        rows.append(
            [
                name,
                preset["title"],
                steps,
                rate,
                preset["instances"],
                preset["state_dim"],
                preset["input_dim"] or "-",
                _abbreviate(matrices["J"]),
                _abbreviate(matrices["R"]),
                _abbreviate(matrices["G"]),
            ]
        )
    headers = ["Preset", "Experiment", "Training steps", "Learning rate", "Inst.", "n", "m", "J", "R", "G"]
    return tabulate(rows, headers=headers)


def display_preset_table():
    """Print the preset table"""
    print("\n=== EXPERIMENT PRESETS ===")
    print(format_preset_table())
    print("\ns. = state-dependent, c. = constant, - = absent")
