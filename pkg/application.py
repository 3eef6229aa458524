"""
Muskat Lab - Results Browser
Read-only Flask application over the run artifacts in the output root
(MUSKAT_OUTPUT_DIR, default ./runs). It serves summaries, norm tables and
SVG plots; it never starts or steers a run.
"""

import json
import os
from pathlib import Path

from dotenv import load_dotenv
from flask import Flask, abort, jsonify, send_file

from errors import PlotError
from plots import NORM_COLUMNS, read_table, render

load_dotenv()

# Initialize Flask app
app = Flask(__name__)

# Configuration
app.config['OUTPUT_ROOT'] = os.environ.get('MUSKAT_OUTPUT_DIR', 'runs')

SERVICE = {
    'name': 'muskat-lab',
    'version': '1.0.0',
}

ARTIFACTS = ('summary.json', 'certification.json', 'norms.csv', 'sweep.csv',
             'twophase.csv', 'linear.csv')


def output_root() -> Path:
    return Path(app.config['OUTPUT_ROOT'])


def run_directory(run: str) -> Path:
    """Resolve a run name to its directory, refusing anything outside the output root."""
    root = output_root().resolve()
    path = (root / run).resolve()
    if path.parent != root or not (path / 'summary.json').is_file():
        abort(404)
    return path


def load_summary(path: Path) -> dict:
    with open(path / 'summary.json', 'r', encoding='utf-8') as handle:
        return json.load(handle)


@app.route('/health')
def health():
    """Health check endpoint for monitoring"""
    return jsonify({
        'status': 'healthy',
        'service': SERVICE['name'],
        'version': SERVICE['version'],
        'output_root': str(output_root()),
    })


@app.route('/api/runs')
def api_runs():
    """Every run directory under the output root that holds a summary.json"""
    root = output_root()
    runs = []
    if root.is_dir():
        for path in sorted(p for p in root.iterdir() if (p / 'summary.json').is_file()):
            summary = load_summary(path)
            runs.append({
                'run': path.name,
                'command': summary.get('command'),
                'config_hash': summary.get('config_hash'),
                'passed': summary.get('passed'),
            })
    return jsonify({'runs': runs, 'count': len(runs)})


@app.route('/api/runs/<run>')
def api_run(run):
    """Summary of one run plus the artifact files present"""
    path = run_directory(run)
    return jsonify({
        'run': run,
        'summary': load_summary(path),
        'artifacts': [name for name in ARTIFACTS if (path / name).is_file()],
    })


@app.route('/api/runs/<run>/norms')
def api_run_norms(run):
    """Norm time series of a single run as JSON columns"""
    path = run_directory(run) / 'norms.csv'
    if not path.is_file():
        abort(404)
    try:
        table = read_table(path)
        columns = {name: table.column(name).tolist() for name in NORM_COLUMNS}
    except PlotError as e:
        return jsonify({'error': str(e)}), 422
    # JSON has no NaN
    columns = {name: [v if v == v else None for v in values] for name, values in columns.items()}
    return jsonify({'run': run, 'config_hash': table.config_hash, 'columns': columns})


@app.route('/runs/<run>/<name>.svg')
def run_plot(run, name):
    """Serve a plot, rendering it from the run's CSV on first request"""
    path = run_directory(run)
    svg = path / f'{name}.svg'
    if not svg.is_file():
        source = path / ('sweep.csv' if name == 'theta_ratio' else 'norms.csv')
        if not source.is_file():
            abort(404)
        try:
            render(source, path)
        except PlotError as e:
            return jsonify({'error': str(e)}), 422
        if not svg.is_file():
            abort(404)
    return send_file(svg, mimetype='image/svg+xml')


@app.errorhandler(404)
def not_found(e):
    return jsonify({'error': 'Not found'}), 404


@app.errorhandler(500)
def server_error(e):
    return jsonify({'error': 'Internal server error'}), 500


# For local development
if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    debug = os.environ.get('FLASK_ENV') == 'development'
    app.run(host='0.0.0.0', port=port, debug=debug)
