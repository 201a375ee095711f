"""Regenerate the shipped default cost table from the circuit figures in approxrv.energy."""
import json
from pathlib import Path

from approxrv.energy import DEFAULT_TABLE, default_cost_table

OUT = Path(__file__).resolve().parents[1] / "src" / "approxrv" / "data" / DEFAULT_TABLE


def main():
    doc = default_cost_table().to_document()
    lines = ["{"]
    for key in ("base_energy_per_instr_pj", "voltage_v", "frequency_mhz", "fallback_pj"):
        lines.append(f"  {json.dumps(key)}: {json.dumps(doc[key])},")
    lines.append('  "entries": [')
    rows = [f"    {json.dumps(e)}" for e in doc["entries"]]
    lines.append(",\n".join(rows))
    lines.append("  ]")
    lines.append("}")
    OUT.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({len(rows)} entries)")


if __name__ == "__main__":
    main()
