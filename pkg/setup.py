#!/usr/bin/env python
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

# get the requirements from the requirements.txt
requirements = [line.strip()
                for line in open('requirements.txt').readlines()
                if line.strip() and not line.startswith('#')]
# get the test requirements from the dev-requirements.txt
test_requirements = [line.strip()
                     for line in
                     open('dev-requirements.txt').readlines()
                     if line.strip() and not line.startswith('#')]

readme = open('README.rst').read()
history = open('HISTORY.rst').read().replace('.. :changelog:', '')
version = open('.VERSION').read().strip()


setup(
    name='''seccansim''',
    version=version,
    description='''Bit accurate CAN 2.0A receive datapath simulator with an in-controller 4-bit quantized IDS.''',
    long_description=readme + '\n\n' + history,
    author='''SecCAN simulator contributors''',
    author_email='''seccansim@users.noreply.github.com''',
    url='''https://github.com/seccansim/seccansim''',
    packages=find_packages(where='.', exclude=('tests', 'tests.*')),
    package_dir={'''seccansim''':
                 '''seccansim'''},
    include_package_data=True,
    install_requires=requirements,
    python_requires='>=3.9',
    license='MIT',
    zip_safe=False,
    keywords='''seccansim can-bus intrusion-detection quantized-neural-network simulation''',
    entry_points={
        'console_scripts': [
            'seccan-sim = seccansim.seccansim:main'
        ]},
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        ],
    test_suite='tests',
    tests_require=test_requirements
)
