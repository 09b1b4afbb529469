# Generated by Django 5.0.1 on 2026-10-18 12:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='VerificationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=255)),
                ('task_path', models.CharField(blank=True, max_length=1024)),
                ('source', models.TextField(blank=True)),
                ('engine', models.CharField(choices=[('general', 'General'), ('rc', 'Refutationally complete')], default='general', max_length=20)),
                ('beta', models.CharField(max_length=64)),
                ('verdict', models.CharField(choices=[('safe', 'Safe'), ('violation', 'Violation'), ('unknown', 'Unknown')], max_length=20)),
                ('bound', models.CharField(blank=True, max_length=255, null=True)),
                ('reason', models.TextField(blank=True)),
                ('wall_time', models.FloatField(default=0)),
                ('iterations', models.IntegerField(default=0)),
                ('trace_count', models.IntegerField(blank=True, null=True)),
                ('total_weight', models.CharField(blank=True, max_length=255, null=True)),
                ('report', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
