"""Toolkit for building and evaluating honeycomb defect datasets on concrete imagery."""

__version__ = "0.1.0"

TOOL_NAME = "hickit"


def output_header(command: str, config: dict, seed: int | None = None) -> dict:
    """Provenance header embedded in every generated artifact.

    Args:
        command: subcommand or library entry point that produced the output.
        config: the effective configuration, JSON-serializable.
        seed: RNG seed if the operation used one.
    """
    header = {"tool": TOOL_NAME, "version": __version__, "command": command, "config": config}
    if seed is not None:
        header["seed"] = seed
    return header
