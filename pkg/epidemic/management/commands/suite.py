from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from epidemic.suite import CHECKS, theorem_suite


class Command(BaseCommand):
    help = 'Run the acceptance battery and write suite.csv.'

    def add_arguments(self, parser):
        parser.add_argument('--out', default=None, help='Output directory (default: SIS_OUTPUT_DIR/suite).')
        parser.add_argument('--n', type=int, default=400, help='Mesh size of the default fixture.')
        parser.add_argument('--trials', type=int, default=100, help='Randomized spectral trials.')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--only', nargs='+', choices=sorted(CHECKS), help='Run only these checks.')

    def handle(self, *args, **options):
        out_dir = options['out'] or settings.SIS_OUTPUT_DIR / 'suite'
        record = theorem_suite(out_dir, n=options['n'], trials=options['trials'], seed=options['seed'],
                               only=options['only'])
        for name, passed in record.checks.items():
            self.stdout.write(f'{name:<22} {"pass" if passed else "FAIL"}')
        failed = [name for name, passed in record.checks.items() if not passed]
        if failed or record.errors:
            raise CommandError(f'Failed checks: {", ".join(failed + record.errors)}')
        self.stdout.write(self.style.SUCCESS(f'all {len(record.checks)} checks passed in {record.wall_time:.1f}s'))
