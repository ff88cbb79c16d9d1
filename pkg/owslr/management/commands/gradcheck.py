import time

from django.core.management.base import BaseCommand, CommandError

from owslr.services.diagnostics import DEFAULT_INSTANCES, run_decode_suite, run_ops_suite


class Command(BaseCommand):
    help = 'Finite-difference check of every tensor op and of the end-to-end decode loss (float64)'

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--instances', type=int, default=DEFAULT_INSTANCES,
                            help='Seeded instances per op and decode instances')

    def handle(self, *args, **options):
        if options['instances'] < 1:
            raise CommandError('--instances must be >= 1')
        start = time.monotonic()
        self.stdout.write('suite,check,max_rel_error,tolerance,checked,skipped,status')
        failed = []
        for runner in (run_ops_suite, run_decode_suite):
            report = runner(options['seed'], options['instances'])
            for r in report.results:
                status = 'ok' if r.passed else 'FAIL'
                self.stdout.write(
                    f'{report.suite},{r.name},{r.max_rel_error:.3e},{r.tolerance:.0e},{r.checked},{r.skipped},{status}'
                )
            failed.extend(f'{report.suite}:{r.name}' for r in report.failures)

        elapsed = time.monotonic() - start
        if failed:
            raise CommandError(f'{len(failed)} gradient check(s) failed: {", ".join(failed)}')
        self.stdout.write(self.style.SUCCESS(f'# all gradient checks passed in {elapsed:.1f}s'))
