import json

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from epidemic.runner import load_config, run


class Command(BaseCommand):
    help = 'Run one scenario config and write its CSV / JSON outputs.'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to the scenario JSON file.')
        parser.add_argument('--out', default=None, help='Output directory (default: SIS_OUTPUT_DIR).')

    def handle(self, *args, **options):
        # Step 1: validate the config
        try:
            config = load_config(options['config'])
        except FileNotFoundError as exc:
            raise CommandError(f'Config not found: {options["config"]}') from exc
        except json.JSONDecodeError as exc:
            raise CommandError(f'Config is not valid JSON: {exc}') from exc
        except ValidationError as exc:
            raise CommandError(f'Invalid config: {json.dumps(exc.detail)}') from exc

        # Step 2: run the task
        out_dir = options['out'] or settings.SIS_OUTPUT_DIR
        record = run(config, out_dir)

        # Step 3: report
        for path in record.outputs:
            self.stdout.write(path)
        for name, passed in record.checks.items():
            self.stdout.write(f'{name}: {"pass" if passed else "FAIL"}')
        if record.errors:
            raise CommandError('; '.join(record.errors))
        failed = [name for name, passed in record.checks.items() if not passed]
        if failed:
            raise CommandError(f'Failed checks: {", ".join(failed)}')
        self.stdout.write(self.style.SUCCESS(f'{config.task} finished in {record.wall_time:.2f}s'))
