"""Command line front end and pipeline driver.

Configuration files are flat ``key = value`` documents (``#`` starts a
comment).  Every key has a default, so an empty file is valid; see
``grainmorph --help`` for the schema.  Precedence, lowest first:
defaults, ``--preset``, ``--config``, ``--set key=value``, explicit flags.

Artifacts written by ``run`` (into ``--out``):

==========================  ==============================================
``config.txt``              resolved configuration (without paths)
``smoothed.pgm``            PCNN-smoothed image (when smoothing is on)
``mask.pgm``                segmentation, foreground 255
``contours.txt``            dilated blob contours
``binder_contours.txt``     contours of the inverted mask
``mesh.txt``                first tessellation
``skeleton.txt``            unpruned skeleton of the first tessellation
``grey.txt``                mean grey per triangle of ``mesh.txt``
``refined_contours.txt``    contours after grain separation
``mesh_refined.txt``        tessellation of the refined contours
``skeleton_refined.txt``    its unpruned skeleton
``final_contours.txt``      refined contours without grain holes
``mesh_final.txt``          tessellation used for the statistics
``skeleton_final.txt``      its unpruned skeleton
``skeleton_pruned.txt``     its pruned skeleton
``particles.csv``           ``id,class,area,length,width,cx,cy,orientation,holes``
``scene.json``              scene summary plus every particle, full precision
``overlay.svg``             layered drawing of the selected artifacts
==========================  ==============================================

Each single-stage subcommand reads the previous stage's artifact, so the
stages can be chained by hand.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .cat import CatSkeleton, build_skeleton, prune_skeleton
from .contour import ContourSet, extract_contours
from .morphology import (SeparationConfig, classify_blobs, particle_statistics, remove_holes,
                         scene_statistics, separate_grains, triangle_mean_grey)
from .raster import GreyImage, load_greyscale, save_pgm
from .report import RenderSpec, emit_stats, render_svg
from .segmentation import (BinaryImage, PcnnParams, SpectralBand, pcnn_segment, pcnn_smooth,
                           spectral_segment)
from .tessellate import TriMesh, constrained_delaunay

STAGES = ("smooth", "segment", "contours", "mesh", "skeleton", "separate", "stats", "render")
PRESETS = ("original-spectral", "original-pcnn", "smoothed-spectral", "smoothed-pcnn")


def _onoff(v: str) -> bool:
    s = v.strip().lower()
    if s in ("on", "true", "yes", "1"):
        return True
    if s in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {v!r}")


def _layers(v: str) -> tuple:
    return tuple(p.strip() for p in v.split(",") if p.strip())


# key: (type, default, description)
SCHEMA = {
    "input": (str, "", "input image (PGM or any Pillow-readable raster)"),
    "output": (str, "grainmorph-out", "output directory"),
    "segmentation": (str, "spectral", "spectral | pcnn"),
    "smoothing": (_onoff, "off", "PCNN smoothing before segmentation (on/off)"),
    "binder_low": (int, "0", "lowest binder grey level"),
    "binder_high": (int, "100", "highest binder grey level"),
    "pcnn_linking_radius": (int, "1", "PCNN linking window radius (pixels)"),
    "pcnn_beta": (float, "0.2", "PCNN linking strength"),
    "pcnn_feed_decay": (float, "0.7", "PCNN feeding decay factor"),
    "pcnn_link_decay": (float, "0.7", "PCNN linking decay factor"),
    "pcnn_threshold_decay": (float, "0.9", "PCNN threshold decay factor"),
    "pcnn_threshold_amplitude": (float, "20", "PCNN threshold jump after a pulse"),
    "pcnn_initial_threshold": (float, "255", "PCNN starting threshold"),
    "pcnn_max_iterations": (int, "50", "PCNN iteration limit"),
    "dilation": (float, "0.25", "contour dilation delta, 0 < delta < 0.5"),
    "cut_threshold": (float, "30", "grey fluctuation that triggers a cut"),
    "max_passes": (int, "8", "grain separation passes"),
    "fluctuation": (str, "range", "range | max-step"),
    "prune_tau": (float, "1.0", "skeleton significance threshold"),
    "histogram_bin_width": (float, "2", "equivalent-diameter bin width (pixels)"),
    "binder_particles": (_onoff, "on", "measure the binder regions too (on/off)"),
    "workers": (int, "1", "worker processes for per-blob work"),
    "render_layers": (_layers, "image,contours,grey-triangles,skeleton-pruned",
                      "comma-separated overlay layers"),
    "render_scale": (float, "4", "SVG size in output pixels per image pixel"),
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("grainmorph").joinpath("presets", f"{name}.cfg").read_text()


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    output: str
    segmentation: str
    smoothing: bool
    band: SpectralBand
    pcnn: PcnnParams
    dilation: float
    separation: SeparationConfig
    prune_tau: float
    histogram_bin_width: float
    binder_particles: bool
    workers: int
    render: RenderSpec
    raw: tuple = ()

    @classmethod
    def from_values(cls, values: dict) -> "PipelineConfig":
        merged = {k: spec[1] for k, spec in SCHEMA.items()}
        merged.update(values)
        try:
            v = {k: SCHEMA[k][0](merged[k]) for k in SCHEMA}
            if v["segmentation"] not in ("spectral", "pcnn"):
                raise ValueError(f"segmentation must be spectral or pcnn, got {v['segmentation']!r}")
            if not 0.0 < v["dilation"] < 0.5:
                raise ValueError("dilation must satisfy 0 < delta < 0.5")
            if v["prune_tau"] < 0:
                raise ValueError("prune_tau must be >= 0")
            if v["histogram_bin_width"] <= 0:
                raise ValueError("histogram_bin_width must be > 0")
            if v["workers"] < 1:
                raise ValueError("workers must be >= 1")
            pcnn = PcnnParams(
                linking_radius=v["pcnn_linking_radius"], beta=v["pcnn_beta"],
                feed_decay=v["pcnn_feed_decay"], link_decay=v["pcnn_link_decay"],
                threshold_decay=v["pcnn_threshold_decay"],
                threshold_amplitude=v["pcnn_threshold_amplitude"],
                initial_threshold=v["pcnn_initial_threshold"],
                max_iterations=v["pcnn_max_iterations"])
            return cls(
                input=v["input"], output=v["output"], segmentation=v["segmentation"],
                smoothing=v["smoothing"], band=SpectralBand(v["binder_low"], v["binder_high"]),
                pcnn=pcnn, dilation=v["dilation"],
                separation=SeparationConfig(v["cut_threshold"], v["max_passes"],
                                            v["fluctuation"], v["workers"]),
                prune_tau=v["prune_tau"], histogram_bin_width=v["histogram_bin_width"],
                binder_particles=v["binder_particles"], workers=v["workers"],
                render=RenderSpec(v["render_layers"], scale=v["render_scale"]),
                raw=tuple(sorted(merged.items())))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path=None, preset=None, overrides=None) -> "PipelineConfig":
        values = {}
        if preset:
            values.update(parse_config_text(preset_text(preset), f"preset {preset}"))
        if path:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            values.update(parse_config_text(text, str(path)))
        values.update(overrides or {})
        return cls.from_values(values)

    def to_text(self, include_paths: bool = False) -> str:
        lines = []
        for key, value in self.raw:
            if key in ("input", "output") and not include_paths:
                continue
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


# -- artifact I/O -----------------------------------------------------------

def _write(out: Path, name: str, text: str):
    (out / name).write_text(text, encoding="utf-8", newline="\n")


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc


def load_mask(path) -> BinaryImage:
    """Bi-level image file to mask: grey >= 128 is foreground."""
    return BinaryImage(load_greyscale(path).pixels >= 128)


def grey_text(grey) -> str:
    return "".join(f"{g:.6f}\n" for g in grey)


# -- stages -----------------------------------------------------------------

class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, f"{type(exc).__name__}: {exc}") from exc
        return False


def stage_smooth(cfg: PipelineConfig, img: GreyImage) -> GreyImage:
    with _Stage("smooth"):
        return pcnn_smooth(img, cfg.pcnn.replace(mode="smooth"), workers=cfg.workers)


def stage_segment(cfg: PipelineConfig, img: GreyImage) -> BinaryImage:
    with _Stage("segment"):
        if cfg.segmentation == "spectral":
            return spectral_segment(img, cfg.band)
        return pcnn_segment(img, cfg.pcnn, cfg.band, workers=cfg.workers)


def stage_contours(cfg: PipelineConfig, mask: BinaryImage):
    with _Stage("contours"):
        return (extract_contours(mask, cfg.dilation),
                extract_contours(mask.inverted(), cfg.dilation))


def stage_mesh(cfg: PipelineConfig, cs: ContourSet) -> TriMesh:
    with _Stage("mesh"):
        return constrained_delaunay(cs, workers=cfg.workers)


def stage_skeleton(cfg: PipelineConfig, mesh: TriMesh) -> CatSkeleton:
    with _Stage("skeleton"):
        return build_skeleton(mesh)


def stage_separate(cfg: PipelineConfig, cs: ContourSet, img: GreyImage, mesh=None, skel=None):
    with _Stage("separate"):
        if mesh is None:
            mesh = constrained_delaunay(cs, workers=cfg.workers)
        if skel is None:
            skel = build_skeleton(mesh)
        gm = triangle_mean_grey(mesh, img)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            refined = separate_grains(gm, skel, cfg.separation)
        for w in caught:
            print(f"warning [separate]: {w.message}", file=sys.stderr)
        return refined, gm


def _measure(cfg, cs: ContourSet, img: GreyImage, remove: bool):
    """CDT/CAT of ``cs``, classification, hole removal, CDT/CAT again, pruning
    and per-blob statistics.  Returns a dict of intermediate artifacts."""
    mesh2 = constrained_delaunay(cs, workers=cfg.workers)
    skel2 = build_skeleton(mesh2)
    classes = classify_blobs(triangle_mean_grey(mesh2, img), cfg.band)
    cs3 = remove_holes(cs, classes) if remove else cs
    mesh3 = constrained_delaunay(cs3, workers=cfg.workers, validate=False)
    skel3 = build_skeleton(mesh3)
    pruned = prune_skeleton(skel3, cfg.prune_tau)
    stats = [particle_statistics(mesh3, pruned, classes[b], b) for b in range(mesh3.n_blobs)]
    anchors = [tuple(cs3[k].points[0][::-1]) for k, _ in cs3.blobs()]
    return {"mesh2": mesh2, "skel2": skel2, "classes": classes, "cs3": cs3, "mesh3": mesh3,
            "skel3": skel3, "pruned": pruned, "stats": stats, "anchors": anchors}


def stage_stats(cfg: PipelineConfig, cs: ContourSet, img: GreyImage, binder_cs=None):
    with _Stage("stats"):
        fg = _measure(cfg, cs, img, remove=True)
        rows = [(a, 0, s) for a, s in zip(fg["anchors"], fg["stats"])]
        if binder_cs is not None and cfg.binder_particles and len(binder_cs):
            bg = _measure(cfg, binder_cs, img, remove=True)
            rows += [(a, 1, s) for a, s in zip(bg["anchors"], bg["stats"])]
        rows.sort(key=lambda r: (r[0], r[1]))
        particles = [_with_id(s, k) for k, (_, _, s) in enumerate(rows)]
        scene = scene_statistics(particles, img, cfg.histogram_bin_width)
        return fg, particles, scene


def _with_id(s, k):
    return replace(s, id=k)


def stage_render(cfg: PipelineConfig, scene: dict, layers=None) -> str:
    with _Stage("render"):
        spec = cfg.render if layers is None else RenderSpec(
            layers, cfg.render.stroke_width, cfg.render.node_radius, cfg.render.scale)
        return render_svg(scene, spec)


def _grey_mesh(mesh, img):
    return triangle_mean_grey(mesh, img) if mesh is not None and img is not None else None


def _load_image(path, stage) -> GreyImage:
    with _Stage(stage):
        if not path:
            raise ValueError("no input image given")
        return load_greyscale(path)


def run_pipeline(cfg: PipelineConfig) -> int:
    """Run every stage and write all artifacts; return the exit status."""
    try:
        execute(cfg)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    return 0


def execute(cfg: PipelineConfig) -> dict:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "config.txt", cfg.to_text())
    img = _load_image(cfg.input, "load")
    work = img
    if cfg.smoothing:
        work = stage_smooth(cfg, img)
        save_pgm(work, out / "smoothed.pgm")
    mask = stage_segment(cfg, work)
    save_pgm(mask.to_grey(), out / "mask.pgm")
    cs, binder_cs = stage_contours(cfg, mask)
    _write(out, "contours.txt", cs.to_text())
    _write(out, "binder_contours.txt", binder_cs.to_text())
    mesh = stage_mesh(cfg, cs)
    _write(out, "mesh.txt", mesh.to_text())
    skel = stage_skeleton(cfg, mesh)
    _write(out, "skeleton.txt", skel.to_text())
    refined, gm = stage_separate(cfg, cs, img, mesh, skel)
    _write(out, "grey.txt", grey_text(gm.grey))
    _write(out, "refined_contours.txt", refined.to_text())
    fg, particles, scene = stage_stats(cfg, refined, img, binder_cs)
    _write(out, "mesh_refined.txt", fg["mesh2"].to_text())
    _write(out, "skeleton_refined.txt", fg["skel2"].to_text())
    _write(out, "final_contours.txt", fg["cs3"].to_text())
    _write(out, "mesh_final.txt", fg["mesh3"].to_text())
    _write(out, "skeleton_final.txt", fg["skel3"].to_text())
    _write(out, "skeleton_pruned.txt", fg["pruned"].to_text())
    _write(out, "particles.csv", emit_stats(scene, particles, "csv"))
    _write(out, "scene.json", emit_stats(scene, particles, "json"))
    svg = stage_render(cfg, {"image": img, "mask": mask, "contours": fg["cs3"],
                             "mesh": fg["mesh3"], "grey": _grey_mesh(fg["mesh3"], img),
                             "skeleton": fg["skel3"], "pruned": fg["pruned"]})
    _write(out, "overlay.svg", svg)
    return {"image": img, "mask": mask, "contours": cs, "binder_contours": binder_cs,
            "mesh": mesh, "skeleton": skel, "grey": gm, "refined": refined,
            "particles": particles, "scene": scene, **fg}


def run_stage(stage: str, cfg: PipelineConfig, source: str, image=None, binder=None) -> int:
    """Run a single stage on the previous stage's artifact."""
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if stage in ("smooth", "segment"):
            img = _load_image(source, stage)
            if stage == "smooth":
                save_pgm(stage_smooth(cfg, img), out / "smoothed.pgm")
            else:
                save_pgm(stage_segment(cfg, img).to_grey(), out / "mask.pgm")
        elif stage == "contours":
            with _Stage(stage):
                mask = load_mask(source)
            cs, binder_cs = stage_contours(cfg, mask)
            _write(out, "contours.txt", cs.to_text())
            _write(out, "binder_contours.txt", binder_cs.to_text())
        elif stage == "mesh":
            with _Stage(stage):
                cs = ContourSet.from_text(_read_text(source))
            _write(out, "mesh.txt", stage_mesh(cfg, cs).to_text())
        elif stage == "skeleton":
            with _Stage(stage):
                mesh = TriMesh.from_text(_read_text(source))
            skel = stage_skeleton(cfg, mesh)
            _write(out, "skeleton.txt", skel.to_text())
            with _Stage(stage):
                _write(out, "skeleton_pruned.txt", prune_skeleton(skel, cfg.prune_tau).to_text())
        elif stage == "separate":
            img = _load_image(image, stage)
            with _Stage(stage):
                cs = ContourSet.from_text(_read_text(source))
            refined, gm = stage_separate(cfg, cs, img)
            _write(out, "grey.txt", grey_text(gm.grey))
            _write(out, "refined_contours.txt", refined.to_text())
        elif stage == "stats":
            img = _load_image(image, stage)
            with _Stage(stage):
                cs = ContourSet.from_text(_read_text(source))
                binder_cs = ContourSet.from_text(_read_text(binder)) if binder else None
            fg, particles, scene = stage_stats(cfg, cs, img, binder_cs)
            _write(out, "final_contours.txt", fg["cs3"].to_text())
            _write(out, "mesh_final.txt", fg["mesh3"].to_text())
            _write(out, "skeleton_final.txt", fg["skel3"].to_text())
            _write(out, "skeleton_pruned.txt", fg["pruned"].to_text())
            _write(out, "particles.csv", emit_stats(scene, particles, "csv"))
            _write(out, "scene.json", emit_stats(scene, particles, "json"))
        elif stage == "render":
            _write(out, "overlay.svg", _render_directory(cfg, Path(source), image))
        else:
            raise StageError("cli", f"unknown stage {stage!r}")
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    return 0


def _render_directory(cfg, src: Path, image) -> str:
    """Overlay of whatever artifacts exist in a run directory."""
    with _Stage("render"):
        scene = {}
        if image:
            scene["image"] = load_greyscale(image)
        if (src / "mask.pgm").exists():
            scene["mask"] = load_mask(src / "mask.pgm")
        for name in ("final_contours.txt", "refined_contours.txt", "contours.txt"):
            if (src / name).exists():
                scene["contours"] = ContourSet.from_text(_read_text(src / name))
                break
        for name in ("mesh_final.txt", "mesh.txt"):
            if (src / name).exists():
                scene["mesh"] = TriMesh.from_text(_read_text(src / name))
                break
        for key, name in (("skeleton", "skeleton_final.txt"), ("pruned", "skeleton_pruned.txt")):
            if (src / name).exists():
                scene[key] = CatSkeleton.from_text(_read_text(src / name))
        if "skeleton" not in scene and (src / "skeleton.txt").exists():
            scene["skeleton"] = CatSkeleton.from_text(_read_text(src / "skeleton.txt"))
        scene["grey"] = _grey_mesh(scene.get("mesh"), scene.get("image"))
        needs = {"image": "image", "mask": "mask", "contours": "contours", "mesh": "mesh",
                 "grey-triangles": "grey", "skeleton-unpruned": "skeleton",
                 "skeleton-pruned": "pruned"}
        layers = tuple(name for name in cfg.render.layers if scene.get(needs[name]) is not None)
        if not layers:
            raise ValueError(f"no renderable artifacts in {src}")
    return stage_render(cfg, scene, layers)


# -- argument parsing -------------------------------------------------------

def _schema_help() -> str:
    width = max(len(k) for k in SCHEMA)
    return "\n".join(f"  {k:<{width}} = {d:<12} {desc}" for k, (_, d, desc) in SCHEMA.items())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--preset", choices=PRESETS, help="built-in configuration preset")
    common.add_argument("--out", help="output directory (config key 'output')")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    parser = argparse.ArgumentParser(
        prog="grainmorph",
        description="Grain morphology of grey-level micrographs: segmentation, dilated "
                    "contours, constrained Delaunay tessellation, chordal axis skeletons, "
                    "grain separation and particle statistics.",
        epilog="Statistics: particles.csv has columns id,class,area,length,width,cx,cy,"
               "orientation,holes (6 significant digits); scene.json holds the scene "
               "summary (grain_count, binder_count, grain_area_fraction, histogram, "
               "bin_width) and all particles at full precision.\n\nConfiguration keys:\n"
               + _schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run the whole pipeline")
    run.add_argument("input", nargs="?", help="input image (config key 'input')")
    run.add_argument("--stage", choices=STAGES,
                     help="run only this stage; INPUT is then the previous stage's artifact")
    run.add_argument("--image", help="grey image for the separate/stats/render stages")
    run.add_argument("--binder", help="binder contours for the stats stage")
    inputs = {
        "smooth": "grey image", "segment": "grey image", "contours": "mask image",
        "mesh": "contours.txt", "skeleton": "mesh.txt", "separate": "contours.txt",
        "stats": "refined_contours.txt", "render": "run directory",
    }
    for name in STAGES:
        p = sub.add_parser(name, parents=[common], help=f"{name} stage only ({inputs[name]})")
        p.add_argument("input", help=inputs[name])
        if name in ("separate", "stats", "render"):
            p.add_argument("--image", required=name != "render", help="grey image")
        if name == "stats":
            p.add_argument("--binder", help="binder_contours.txt to measure binder particles")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            parser.error(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    stage = args.command if args.command != "run" else args.stage
    if args.input and (stage is None or stage in ("smooth", "segment")):
        overrides["input"] = args.input
    if args.out:
        overrides["output"] = args.out
    try:
        for k in overrides:
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
        cfg = PipelineConfig.load(args.config, args.preset, overrides)
    except ConfigError as exc:
        print(f"error [config] {exc}", file=sys.stderr)
        return 2
    if stage is None:
        if not cfg.input:
            print("error [config] no input image", file=sys.stderr)
            return 2
        return run_pipeline(cfg)
    if not args.input:
        print(f"error [config] stage {stage} needs an input", file=sys.stderr)
        return 2
    return run_stage(stage, cfg, args.input, getattr(args, "image", None),
                     getattr(args, "binder", None))


if __name__ == "__main__":
    sys.exit(main())
