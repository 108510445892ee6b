#!/usr/bin/env python3
"""
theta-lab: verificación numérica de funciones theta, sistemas de polos
y residuos de ecuaciones integrables.

Este script ejecuta escenarios JSON, la batería de identidades de theta,
simulaciones de partículas y lotes de escenarios, y escribe reportes JSON
(o CSV) con los residuos y su veredicto.

Uso:
    python main.py check-identities --g 2 --samples 100 --seed 7
    python main.py cm simulate --config cm2.json
    python main.py run --config scenarios/kp.json
    python main.py batch scenarios/

Códigos de salida:
    0  todos los residuos dentro de su umbral
    2  algún residuo fuera de su umbral
    1  error de configuración o de cálculo
"""

import argparse
import sys

# Agregar el directorio raíz al path
sys.path.insert(0, ".")

from src.config.settings import settings, SCENARIO_KINDS
from src.runner import batch, check_identities, cm_simulate, exit_code_for, run
from src.utils.errors import ThetaLabError
from src.utils.helpers import setup_logging

_STATUS_ICONS = {"pass": "✅", "fail": "⚠️ ", "error": "❌"}


def print_reports(reports) -> None:
    """Imprime una línea por escenario y sus residuos fuera de umbral."""
    if not reports:
        print("\n📭 El archivo no contiene escenarios")
        return
    for report in reports:
        worst = report.max_residual
        worst_text = f"{worst:.2e}" if worst is not None else "-"
        print(f"{_STATUS_ICONS[report.status]} {report.scenario:<32} {report.status:<6} máx {worst_text}")
        for entry in report.residuals:
            if not entry.passed:
                print(f"     • {entry.name} = {entry.value:.3e} (umbral {entry.threshold}, {entry.bound})")
        if report.error:
            print(f"     • {report.error}")


def print_summary(summary) -> None:
    """Imprime la tabla del lote."""
    print("\n" + "=" * 72)
    print(f"{'escenario':<32} {'estado':<7} {'máx residuo':>12} {'segundos':>9}")
    print("-" * 72)
    for row in summary.rows:
        worst = f"{row.max_residual:.2e}" if row.max_residual is not None else "-"
        print(f"{row.scenario:<32} {row.status:<7} {worst:>12} {row.seconds:>9.2f}")
    print("=" * 72)


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    """Banderas compartidas por todos los subcomandos."""
    parser.add_argument("--seed", type=int, help="Semilla que reemplaza la de cada escenario")
    parser.add_argument("--tol", type=float, help="Tolerancia de truncamiento de theta (target_abs_tol)")
    parser.add_argument("--out", type=str, help=f"Directorio de reportes (por defecto {settings.THETA_LAB_OUT})")
    parser.add_argument("--threads", type=int, help="Hilos (por defecto THETA_LAB_THREADS)")
    parser.add_argument("--format", choices=["json", "csv"], default="json", help="Formato del reporte")


def build_parser() -> argparse.ArgumentParser:
    kinds = "\n".join(f"  {kind:<12} {text}" for kind, text in SCENARIO_KINDS.items())
    parser = argparse.ArgumentParser(
        description="theta-lab: residuos de funciones theta, sistemas de polos y ecuaciones integrables",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Tipos de escenario:
{kinds}

Ejemplos:
  python main.py check-identities --g 2 --samples 100 --seed 7
  python main.py cm simulate --config cm2.json --out reports
  python main.py run --config scenarios/kp.json --format csv
  python main.py batch scenarios/ --threads 4
        """
    )
    parser.add_argument("--log-level", type=str, default=None, help="Nivel de logging (por defecto LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check-identities", help="Batería de identidades de theta y Weierstrass")
    check.add_argument("--g", type=int, default=2, help="Género de la matriz de periodos aleatoria")
    check.add_argument("--samples", type=int, default=100, help="Puntos aleatorios por identidad")
    add_common_flags(check)

    cm = sub.add_parser("cm", help="Sistemas de partículas")
    cm_sub = cm.add_subparsers(dest="action", required=True)
    simulate = cm_sub.add_parser("simulate", help="Simula CM, RS o Bethe y escribe la trayectoria")
    simulate.add_argument("--config", type=str, required=True, help="Archivo JSON de la simulación")
    add_common_flags(simulate)

    run_cmd = sub.add_parser("run", help="Ejecuta un archivo de escenarios")
    run_cmd.add_argument("--config", type=str, required=True, help="Archivo JSON con uno o varios escenarios")
    add_common_flags(run_cmd)

    batch_cmd = sub.add_parser("batch", help="Ejecuta todos los escenarios de un directorio")
    batch_cmd.add_argument("directory", type=str, help="Directorio con archivos *.json")
    add_common_flags(batch_cmd)
    return parser


def main(argv=None) -> int:
    """Función principal del programa; devuelve el código de salida."""
    args = build_parser().parse_args(argv)

    if args.threads is not None:
        settings.THETA_LAB_THREADS = args.threads
    if args.log_level:
        settings.LOG_LEVEL = args.log_level

    # Verificar configuración
    try:
        settings.validate()
    except ValueError as e:
        print(f"\n❌ Error de configuración: {e}")
        print("\n💡 Tip: revisa las variables THETA_LAB_* de tu archivo .env")
        return 1

    logger = setup_logging(settings.LOG_LEVEL)
    common = dict(out_dir=args.out, seed=args.seed, tol=args.tol, threads=args.threads, fmt=args.format)

    try:
        if args.command == "check-identities":
            reports = [check_identities(g=args.g, samples=args.samples, **common)]
        elif args.command == "cm":
            reports = cm_simulate(args.config, **common)
        elif args.command == "run":
            reports = run(args.config, **common)
        else:
            summary = batch(args.directory, **common)
            print_summary(summary)
            return summary.exit_code
    except (ThetaLabError, ValueError) as e:
        logger.error("%s", e)
        print(f"\n❌ Error: {e}")
        return 1

    print_reports(reports)
    return exit_code_for(reports)


if __name__ == "__main__":
    sys.exit(main())
